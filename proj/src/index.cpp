#include "mia/index.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "mia/error.hpp"
#include "mia/hashing.hpp"
#include "mia/log.hpp"

namespace mia {

namespace fs = std::filesystem;
using nlohmann::json;

const Chunk& MindscapeIndex::chunk(std::uint32_t chunk_id) const {
  if (chunk_id < 1 || chunk_id > chunks.size()) {
    raise(ErrorCode::OutOfRange, "chunk id " + std::to_string(chunk_id));
  }
  return chunks[chunk_id - 1];
}

const SessionSummary& MindscapeIndex::summary(std::uint32_t summary_id) const {
  if (summary_id < 1 || summary_id > summaries.size()) {
    raise(ErrorCode::OutOfRange, "summary id " + std::to_string(summary_id));
  }
  return summaries[summary_id - 1];
}

std::uint32_t MindscapeIndex::summary_of(std::uint32_t chunk_id) const {
  if (chunk_id < 1 || chunk_id > chunks.size()) {
    raise(ErrorCode::OutOfRange,
          "chunk id " + std::to_string(chunk_id) + " not in 1.." +
              std::to_string(chunks.size()));
  }
  return summary_id_for_chunk(chunk_id, window_size);
}

std::vector<std::string> chunk_document(const std::string& text,
                                        std::uint32_t target_len) {
  if (target_len < 1) raise(ErrorCode::InvalidArgument, "target_len must be >= 1");
  std::istringstream in(text);
  std::vector<std::string> chunks;
  std::string word, current;
  std::uint32_t words_in_current = 0;
  while (in >> word) {
    if (words_in_current == target_len) {
      chunks.push_back(std::move(current));
      current.clear();
      words_in_current = 0;
    }
    if (words_in_current) current += ' ';
    current += word;
    ++words_in_current;
  }
  if (words_in_current) chunks.push_back(std::move(current));
  if (chunks.empty()) {
    raise(ErrorCode::EmptyDocument, "document has no words after filtering");
  }
  return chunks;
}

std::uint32_t summary_id_for_chunk(std::uint32_t chunk_id, std::uint32_t window_size) {
  if (chunk_id < 1) raise(ErrorCode::OutOfRange, "chunk ids are 1-based");
  if (window_size < 1) raise(ErrorCode::InvalidArgument, "window size must be >= 1");
  return (chunk_id + window_size - 1) / window_size;
}

std::vector<Window> sessionize(std::size_t chunk_count, std::uint32_t window_size) {
  if (chunk_count == 0) raise(ErrorCode::EmptyDocument, "no chunks to sessionize");
  if (window_size < 1) raise(ErrorCode::InvalidArgument, "window size must be >= 1");
  const std::size_t window_count = (chunk_count + window_size - 1) / window_size;
  std::vector<Window> windows(window_count);
  for (std::size_t j = 0; j < window_count; ++j) {
    windows[j].summary_id = static_cast<std::uint32_t>(j + 1);
    const std::size_t lo = j * window_size + 1;
    const std::size_t hi = std::min(chunk_count, lo + window_size - 1);
    for (std::size_t l = lo; l <= hi; ++l) {
      windows[j].chunk_ids.push_back(static_cast<std::uint32_t>(l));
    }
  }
  return windows;
}

// ---------------------------------------------------------------------------
// Summary cache
// ---------------------------------------------------------------------------

namespace {

struct SummaryCache {
  std::string dir;

  bool enabled() const { return !dir.empty(); }

  std::string key(const std::string& doc_id, std::uint32_t window_index,
                  const std::string& prompt_hash,
                  const std::string& window_text) const {
    std::uint64_t h = fnv1a64(doc_id);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(std::to_string(window_index), h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(prompt_hash, h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(window_text, h);
    return hex64(h);
  }

  bool lookup(const std::string& k, std::string* text_out) const {
    if (!enabled()) return false;
    std::ifstream in(fs::path(dir) / (k + ".json"), std::ios::binary);
    if (!in) return false;
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.contains("summary")) return false;
    *text_out = j["summary"].get<std::string>();
    return true;
  }

  void store(const std::string& k, const std::string& doc_id,
             std::uint32_t window_index, const std::string& prompt_hash,
             const std::string& summary) const {
    if (!enabled()) return;
    std::error_code ec;
    fs::create_directories(dir, ec);
    json j{{"doc_id", doc_id},
           {"window", window_index},
           {"prompt_hash", prompt_hash},
           {"summary", summary}};
    const fs::path final_path = fs::path(dir) / (k + ".json");
    const fs::path tmp_path = fs::path(dir) / (k + ".tmp");
    {
      std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
      out << j.dump(2);
    }
    // write-then-rename keeps concurrent builders from seeing torn files
    fs::rename(tmp_path, final_path, ec);
    if (ec) {
      log_warn("summary cache rename failed: " + ec.message());
      fs::remove(tmp_path, ec);
    }
  }
};

std::string summarize_window(LLMProvider& summarizer,
                             const PromptTemplate& tmpl, std::uint32_t idx,
                             std::size_t total, const std::string& raw_text) {
  Bindings bindings{{"idx", std::to_string(idx)},
                    {"total", std::to_string(total)},
                    {"raw_text", raw_text}};
  RenderedPrompt prompt = render(tmpl, bindings);
  ChatRequest request{prompt.system, prompt.user, tmpl.id};
  std::string text = complete(summarizer, request);
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    // one retry for a blank reply, then give up
    text = complete(summarizer, request);
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
      raise(ErrorCode::EmptySummary,
            "summarizer returned blank output for window " + std::to_string(idx));
    }
  }
  return text;
}

}  // namespace

std::vector<DocumentText> load_corpus(const std::string& path) {
  std::vector<DocumentText> docs;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".txt") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::ifstream in(f, std::ios::binary);
      std::ostringstream buf;
      buf << in.rdbuf();
      docs.push_back(DocumentText{f.stem().string(), buf.str()});
    }
  } else if (fs::is_regular_file(path)) {
    std::ifstream in(path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded()) {
        raise(ErrorCode::ParseError,
              "bad JSON on line " + std::to_string(line_no) + " of " + path);
      }
      docs.push_back(DocumentText{j.at("doc_id").get<std::string>(),
                                  j.at("text").get<std::string>()});
    }
  } else {
    raise(ErrorCode::IoError, "corpus path not found: " + path);
  }
  if (docs.empty()) {
    raise(ErrorCode::EmptyDocument, "no documents found at " + path);
  }
  return docs;
}

MindscapeIndex build_index(const std::vector<DocumentText>& books,
                           EmbeddingProvider& embedder,
                           LLMProvider& summarizer,
                           const PromptTemplate& summary_template,
                           const IndexBuildOptions& options,
                           IndexBuildStats* stats_out) {
  if (books.empty()) raise(ErrorCode::EmptyDocument, "no input documents");

  MindscapeIndex index;
  index.window_size = options.window_size;
  index.chunk_words = options.chunk_words;
  index.embedder_fingerprint = embedder.fingerprint();
  index.summarizer_fingerprint = summarizer.name();
  index.summary_prompt_hash = summary_template.content_hash;

  if (!options.doc_id.empty()) {
    index.doc_id = options.doc_id;
  } else {
    for (std::size_t i = 0; i < books.size(); ++i) {
      if (i) index.doc_id += '+';
      index.doc_id += books[i].doc_id;
    }
  }

  // Merge books in order into one contiguous chunk sequence.
  for (const auto& book : books) {
    auto texts = chunk_document(book.text, options.chunk_words);
    BookSpan span{book.doc_id,
                  static_cast<std::uint32_t>(index.chunks.size() + 1),
                  static_cast<std::uint32_t>(texts.size())};
    for (auto& t : texts) {
      Chunk c;
      c.chunk_id = static_cast<std::uint32_t>(index.chunks.size() + 1);
      c.doc_id = index.doc_id;
      c.text = std::move(t);
      index.chunks.push_back(std::move(c));
    }
    index.books.push_back(std::move(span));
  }

  auto windows = sessionize(index.chunks.size(), options.window_size);

  // Summaries: cache lookups first, then the misses through the provider.
  SummaryCache cache{options.cache_dir};
  IndexBuildStats stats;
  const std::size_t total = windows.size();
  index.summaries.resize(total);

  std::vector<std::string> window_texts(total);
  for (std::size_t j = 0; j < total; ++j) {
    std::string raw;
    for (std::uint32_t id : windows[j].chunk_ids) {
      if (!raw.empty()) raw += '\n';
      raw += index.chunks[id - 1].text;
    }
    window_texts[j] = std::move(raw);
  }

  std::vector<std::string> cache_keys(total);
  std::vector<std::size_t> misses;
  for (std::size_t j = 0; j < total; ++j) {
    auto& summary = index.summaries[j];
    summary.summary_id = windows[j].summary_id;
    summary.doc_id = index.doc_id;
    summary.covered_chunks = windows[j].chunk_ids;
    cache_keys[j] = cache.key(index.doc_id, windows[j].summary_id,
                              summary_template.content_hash, window_texts[j]);
    if (cache.lookup(cache_keys[j], &summary.text)) {
      ++stats.cache_hits;
    } else {
      misses.push_back(j);
    }
  }

  auto run_window = [&](std::size_t j) {
    index.summaries[j].text =
        summarize_window(summarizer, summary_template, windows[j].summary_id,
                         total, window_texts[j]);
    cache.store(cache_keys[j], index.doc_id, windows[j].summary_id,
                summary_template.content_hash, index.summaries[j].text);
  };

  stats.llm_calls = misses.size();
  const std::size_t workers =
      summarizer.single_flight()
          ? 1
          : std::min(options.max_parallel_windows, misses.size());
  if (workers <= 1) {
    for (std::size_t j : misses) run_window(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next.fetch_add(1); i < misses.size();
               i = next.fetch_add(1)) {
            run_window(misses[i]);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  // Embeddings: all chunks and all summaries in one pass each.
  std::vector<std::string> chunk_texts;
  chunk_texts.reserve(index.chunks.size());
  for (const auto& c : index.chunks) chunk_texts.push_back(c.text);
  auto chunk_vecs = embedder.embed_batch(chunk_texts);
  if (chunk_vecs.size() != index.chunks.size()) {
    raise(ErrorCode::ProviderFailure, "embedder returned wrong batch size");
  }
  for (std::size_t i = 0; i < chunk_vecs.size(); ++i) {
    index.chunks[i].embedding = std::move(chunk_vecs[i]);
  }

  std::vector<std::string> summary_texts;
  summary_texts.reserve(index.summaries.size());
  for (const auto& s : index.summaries) summary_texts.push_back(s.text);
  auto summary_vecs = embedder.embed_batch(summary_texts);
  if (summary_vecs.size() != index.summaries.size()) {
    raise(ErrorCode::ProviderFailure, "embedder returned wrong batch size");
  }
  for (std::size_t i = 0; i < summary_vecs.size(); ++i) {
    index.summaries[i].embedding = std::move(summary_vecs[i]);
  }

  if (stats_out) *stats_out = stats;
  return index;
}

// ---------------------------------------------------------------------------
// Persistence
//
// Layout (little-endian):
//   magic "MIAX" | u32 version
//   u64 manifest_len | manifest JSON | u32 crc32(manifest)
//   u64 blob_len | f64 embeddings (chunks then summaries) | u32 crc32(blob)
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'M', 'I', 'A', 'X'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T* value) {
  in.read(reinterpret_cast<char*>(value), sizeof(T));
  if (!in) raise(ErrorCode::CorruptIndex, "unexpected end of index file");
}

std::uint32_t crc_bytes(const void* data, std::size_t len) {
  return static_cast<std::uint32_t>(
      crc32(0L, static_cast<const Bytef*>(data), static_cast<uInt>(len)));
}

}  // namespace

void save_index(const MindscapeIndex& index, const std::string& path) {
  json manifest;
  manifest["doc_id"] = index.doc_id;
  manifest["window_size"] = index.window_size;
  manifest["chunk_words"] = index.chunk_words;
  manifest["embedder_fingerprint"] = index.embedder_fingerprint;
  manifest["summarizer_fingerprint"] = index.summarizer_fingerprint;
  manifest["summary_prompt_hash"] = index.summary_prompt_hash;
  manifest["dim"] = index.chunks.empty() ? 0 : index.chunks.front().embedding.dim();
  json books = json::array();
  for (const auto& b : index.books) {
    books.push_back({{"book_id", b.book_id},
                     {"first_chunk", b.first_chunk},
                     {"chunk_count", b.chunk_count}});
  }
  manifest["books"] = std::move(books);
  json chunks = json::array();
  for (const auto& c : index.chunks) chunks.push_back(c.text);
  manifest["chunks"] = std::move(chunks);
  json summaries = json::array();
  for (const auto& s : index.summaries) summaries.push_back(s.text);
  manifest["summaries"] = std::move(summaries);

  const std::string manifest_bytes = manifest.dump();

  std::vector<double> blob;
  const std::size_t dim =
      index.chunks.empty() ? 0 : index.chunks.front().embedding.dim();
  blob.reserve((index.chunks.size() + index.summaries.size()) * dim);
  for (const auto& c : index.chunks) {
    blob.insert(blob.end(), c.embedding.values.begin(), c.embedding.values.end());
  }
  for (const auto& s : index.summaries) {
    blob.insert(blob.end(), s.embedding.values.begin(), s.embedding.values.end());
  }

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::IoError, "cannot write " + tmp);
    out.write(kMagic, 4);
    write_pod(out, kFormatVersion);
    write_pod(out, static_cast<std::uint64_t>(manifest_bytes.size()));
    out.write(manifest_bytes.data(), static_cast<std::streamsize>(manifest_bytes.size()));
    write_pod(out, crc_bytes(manifest_bytes.data(), manifest_bytes.size()));
    const std::uint64_t blob_len = blob.size() * sizeof(double);
    write_pod(out, blob_len);
    out.write(reinterpret_cast<const char*>(blob.data()),
              static_cast<std::streamsize>(blob_len));
    write_pod(out, crc_bytes(blob.data(), blob_len));
    if (!out) raise(ErrorCode::IoError, "short write to " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    raise(ErrorCode::IoError, "cannot move index into place at " + path);
  }
}

MindscapeIndex load_index(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open index file " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    raise(ErrorCode::CorruptIndex, "bad magic in " + path);
  }
  std::uint32_t version = 0;
  read_pod(in, &version);
  if (version > kFormatVersion) {
    raise(ErrorCode::VersionMismatch,
          "index format v" + std::to_string(version) + " is newer than v" +
              std::to_string(kFormatVersion));
  }

  std::uint64_t manifest_len = 0;
  read_pod(in, &manifest_len);
  std::string manifest_bytes(manifest_len, '\0');
  in.read(manifest_bytes.data(), static_cast<std::streamsize>(manifest_len));
  if (!in) raise(ErrorCode::CorruptIndex, "truncated manifest in " + path);
  std::uint32_t manifest_crc = 0;
  read_pod(in, &manifest_crc);
  if (manifest_crc != crc_bytes(manifest_bytes.data(), manifest_bytes.size())) {
    raise(ErrorCode::CorruptIndex, "manifest checksum mismatch in " + path);
  }

  std::uint64_t blob_len = 0;
  read_pod(in, &blob_len);
  if (blob_len % sizeof(double) != 0) {
    raise(ErrorCode::CorruptIndex, "blob length not a multiple of 8");
  }
  std::vector<double> blob(blob_len / sizeof(double));
  in.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(blob_len));
  if (!in) raise(ErrorCode::CorruptIndex, "truncated embedding blob in " + path);
  std::uint32_t blob_crc = 0;
  read_pod(in, &blob_crc);
  if (blob_crc != crc_bytes(blob.data(), blob_len)) {
    raise(ErrorCode::CorruptIndex, "embedding checksum mismatch in " + path);
  }

  json manifest = json::parse(manifest_bytes, nullptr, false);
  if (manifest.is_discarded()) {
    raise(ErrorCode::CorruptIndex, "manifest is not valid JSON");
  }

  MindscapeIndex index;
  index.doc_id = manifest.at("doc_id").get<std::string>();
  index.window_size = manifest.at("window_size").get<std::uint32_t>();
  index.chunk_words = manifest.at("chunk_words").get<std::uint32_t>();
  index.embedder_fingerprint = manifest.at("embedder_fingerprint").get<std::string>();
  index.summarizer_fingerprint = manifest.at("summarizer_fingerprint").get<std::string>();
  index.summary_prompt_hash = manifest.at("summary_prompt_hash").get<std::string>();
  const std::size_t dim = manifest.at("dim").get<std::size_t>();
  for (const auto& b : manifest.at("books")) {
    index.books.push_back(BookSpan{b.at("book_id").get<std::string>(),
                                   b.at("first_chunk").get<std::uint32_t>(),
                                   b.at("chunk_count").get<std::uint32_t>()});
  }

  const auto& chunk_texts = manifest.at("chunks");
  const auto& summary_texts = manifest.at("summaries");
  const std::size_t expected = (chunk_texts.size() + summary_texts.size()) * dim;
  if (blob.size() != expected) {
    raise(ErrorCode::CorruptIndex, "embedding blob size does not match manifest");
  }

  std::size_t offset = 0;
  auto take_vector = [&]() {
    EmbeddingVector v;
    v.values.assign(blob.begin() + static_cast<std::ptrdiff_t>(offset),
                    blob.begin() + static_cast<std::ptrdiff_t>(offset + dim));
    offset += dim;
    return v;
  };

  std::uint32_t next_id = 1;
  for (const auto& t : chunk_texts) {
    Chunk c;
    c.chunk_id = next_id++;
    c.doc_id = index.doc_id;
    c.text = t.get<std::string>();
    c.embedding = take_vector();
    index.chunks.push_back(std::move(c));
  }
  auto windows = sessionize(index.chunks.size(), index.window_size);
  if (windows.size() != summary_texts.size()) {
    raise(ErrorCode::CorruptIndex, "summary count does not match window partition");
  }
  for (std::size_t j = 0; j < windows.size(); ++j) {
    SessionSummary s;
    s.summary_id = windows[j].summary_id;
    s.doc_id = index.doc_id;
    s.text = summary_texts[j].get<std::string>();
    s.covered_chunks = windows[j].chunk_ids;
    s.embedding = take_vector();
    index.summaries.push_back(std::move(s));
  }
  return index;
}

std::string index_info_json(const MindscapeIndex& index) {
  json j;
  j["doc_id"] = index.doc_id;
  j["window_size"] = index.window_size;
  j["chunk_words"] = index.chunk_words;
  j["chunks"] = index.chunks.size();
  j["summaries"] = index.summaries.size();
  j["dim"] = index.chunks.empty() ? 0 : index.chunks.front().embedding.dim();
  j["embedder_fingerprint"] = index.embedder_fingerprint;
  j["summarizer_fingerprint"] = index.summarizer_fingerprint;
  j["summary_prompt_hash"] = index.summary_prompt_hash;
  json books = json::array();
  for (const auto& b : index.books) {
    books.push_back({{"book_id", b.book_id},
                     {"first_chunk", b.first_chunk},
                     {"chunk_count", b.chunk_count}});
  }
  j["books"] = std::move(books);
  return j.dump(2);
}

}  // namespace mia
