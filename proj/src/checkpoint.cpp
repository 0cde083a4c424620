// SPDX-License-Identifier: Apache-2.0
#include "scalaw/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "scalaw/errors.hpp"
#include "scalaw/text.hpp"

namespace scalaw {

RunKey run_key(const CheckpointRecord& r) { return {r.model_id, r.seed_or_default()}; }

bool canonical_less(const CheckpointRecord& a, const CheckpointRecord& b) {
  return std::forward_as_tuple(a.model_id, a.seed_or_default(), a.loss_corpus, a.tokens_seen) <
         std::forward_as_tuple(b.model_id, b.seed_or_default(), b.loss_corpus, b.tokens_seen);
}

namespace {

std::string describe(const CheckpointRecord& r) {
  std::ostringstream os;
  os << r.family_id << '/' << r.model_id;
  if (r.seed) os << "#seed" << *r.seed;
  os << '@' << r.tokens_seen;
  if (!r.loss_corpus.empty()) os << '[' << r.loss_corpus << ']';
  return os.str();
}

void validate_record(const CheckpointRecord& r) {
  auto fail = [&](const std::string& what) {
    throw DataError("record " + describe(r) + ": " + what);
  };
  if (r.family_id.empty()) fail("family_id is empty");
  if (r.model_id.empty()) fail("model_id is empty");
  if (r.num_params <= 0) fail("num_params must be positive");
  if (r.tokens_seen <= 0) fail("tokens_seen must be positive");
  if (r.total_tokens <= 0) fail("total_tokens must be positive");
  if (r.tokens_seen > r.total_tokens) fail("tokens_seen exceeds total_tokens");
  if (!std::isfinite(r.loss) || r.loss <= 0.0) fail("loss must be positive and finite");
  if (r.flops && (!std::isfinite(*r.flops) || *r.flops < 0.0))
    fail("flops must be nonnegative and finite");
}

}  // namespace

ScaledFamily::ScaledFamily(std::string family_id, std::vector<CheckpointRecord> records)
    : family_id_(std::move(family_id)), records_(std::move(records)) {
  for (const auto& r : records_) {
    validate_record(r);
    if (r.family_id != family_id_)
      throw DataError("record " + describe(r) + ": family_id differs from family '" +
                      family_id_ + "'");
  }
  std::sort(records_.begin(), records_.end(), canonical_less);

  std::vector<CheckpointRecord> unique;
  unique.reserve(records_.size());
  for (auto& r : records_) {
    if (!unique.empty()) {
      const auto& prev = unique.back();
      if (run_key(prev) == run_key(r)) {
        if (prev.num_params != r.num_params)
          throw DataError("record " + describe(r) + ": run mixes num_params values");
        if (prev.total_tokens != r.total_tokens)
          throw DataError("record " + describe(r) + ": run mixes total_tokens values");
        if (prev.loss_corpus == r.loss_corpus && prev.tokens_seen == r.tokens_seen) {
          if (prev == r) continue;
          throw DataError("record " + describe(r) +
                          ": duplicate checkpoint with conflicting values");
        }
      }
    }
    unique.push_back(std::move(r));
  }
  records_ = std::move(unique);
}

std::vector<std::int64_t> ScaledFamily::sizes() const {
  std::vector<std::int64_t> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(r.num_params);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<RunView> ScaledFamily::runs() const {
  std::vector<RunView> out;
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= records_.size(); ++i) {
    if (i == records_.size() || run_key(records_[i]) != run_key(records_[begin])) {
      const auto& first = records_[begin];
      out.push_back({run_key(first), first.num_params, first.total_tokens,
                     std::span<const CheckpointRecord>(records_).subspan(begin, i - begin)});
      begin = i;
    }
  }
  return out;
}

std::vector<std::string> ScaledFamily::corpora() const {
  std::set<std::string> s;
  for (const auto& r : records_) s.insert(r.loss_corpus);
  return {s.begin(), s.end()};
}

// --- parsing ---------------------------------------------------------------

namespace {

class RowBuilder {
 public:
  explicit RowBuilder(std::size_t line) : line_(line) {}

  [[noreturn]] void fail(std::string_view field, std::string_view msg) const {
    throw DataError("line " + std::to_string(line_) + ", field '" + std::string(field) +
                    "': " + std::string(msg));
  }

  std::int64_t integer(std::string_view field, std::string_view text) const {
    text = trim(text);
    if (text.empty()) fail(field, "missing value");
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec == std::errc() && p == text.data() + text.size()) return v;
    // Scientific notation such as 1.2e9 is accepted when integral.
    double d = real(field, text);
    if (d != std::floor(d) || std::fabs(d) > 9.2e18) fail(field, "not an integer");
    return static_cast<std::int64_t>(d);
  }

  double real(std::string_view field, std::string_view text) const {
    text = trim(text);
    if (text.empty()) fail(field, "missing value");
    auto v = parse_double(text);
    if (!v) fail(field, "not a number: '" + std::string(text) + "'");
    if (!std::isfinite(*v)) fail(field, "not finite");
    return *v;
  }

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

void validate_utf8(std::string_view s, std::size_t line) {
  if (!is_valid_utf8(s))
    throw DataError("line " + std::to_string(line) + ": invalid UTF-8");
}

CheckpointRecord record_from_fields(const std::map<std::string, std::string, std::less<>>& f,
                                    const RowBuilder& b) {
  auto get = [&](std::string_view k) -> std::string_view {
    auto it = f.find(k);
    return it == f.end() ? std::string_view{} : std::string_view(it->second);
  };
  CheckpointRecord r;
  r.family_id = std::string(trim(get("family_id")));
  r.model_id = std::string(trim(get("model_id")));
  if (r.family_id.empty()) b.fail("family_id", "missing value");
  if (r.model_id.empty()) b.fail("model_id", "missing value");
  r.num_params = b.integer("num_params", get("num_params"));
  r.tokens_seen = b.integer("tokens_seen", get("tokens_seen"));
  r.total_tokens = b.integer("total_tokens", get("total_tokens"));
  if (!trim(get("seed")).empty()) r.seed = b.integer("seed", get("seed"));
  r.loss = b.real("loss", get("loss"));
  if (!trim(get("flops")).empty()) r.flops = b.real("flops", get("flops"));
  r.loss_corpus = std::string(trim(get("loss_corpus")));
  return r;
}

void validate_with_line(const CheckpointRecord& r, std::size_t line) {
  try {
    validate_record(r);
  } catch (const DataError& e) {
    throw DataError("line " + std::to_string(line) + ": " + e.what());
  }
}

std::vector<ScaledFamily> group(std::vector<CheckpointRecord> records) {
  std::map<std::string, std::vector<CheckpointRecord>> by_family;
  for (auto& r : records) by_family[r.family_id].push_back(std::move(r));
  std::vector<ScaledFamily> out;
  out.reserve(by_family.size());
  for (auto& [id, recs] : by_family) out.emplace_back(id, std::move(recs));
  return out;
}

std::vector<ScaledFamily> ingest_csv(std::istream& in) {
  std::vector<CheckpointRecord> records;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    validate_utf8(line, line_no);
    // Quoted fields may span lines.
    while (csv_needs_continuation(line)) {
      std::string more;
      if (!std::getline(in, more))
        throw DataError("line " + std::to_string(line_no) + ": unterminated quoted field");
      ++line_no;
      if (!more.empty() && more.back() == '\r') more.pop_back();
      validate_utf8(more, line_no);
      line += '\n';
      line += more;
    }
    if (header.empty()) {
      if (trim(line).empty()) continue;
      header = split_csv_line(line);
      for (auto& h : header) h = std::string(trim(h));
      for (std::string_view required :
           {"family_id", "model_id", "num_params", "tokens_seen", "total_tokens", "loss"})
        if (std::find(header.begin(), header.end(), required) == header.end())
          throw DataError("line " + std::to_string(line_no) + ": header lacks column '" +
                          std::string(required) + "'");
      continue;
    }
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, found " +
                      std::to_string(cells.size()));
    std::map<std::string, std::string, std::less<>> fields;
    for (std::size_t i = 0; i < header.size(); ++i) fields[header[i]] = std::move(cells[i]);
    RowBuilder b(line_no);
    auto r = record_from_fields(fields, b);
    validate_with_line(r, line_no);
    records.push_back(std::move(r));
  }
  if (header.empty()) throw DataError("line 1: missing header row");
  return group(std::move(records));
}

std::vector<ScaledFamily> ingest_jsonl(std::istream& in) {
  using nlohmann::json;
  std::vector<CheckpointRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    validate_utf8(line, line_no);
    if (trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    if (!obj.is_object())
      throw DataError("line " + std::to_string(line_no) + ": expected a JSON object");
    RowBuilder b(line_no);
    std::map<std::string, std::string, std::less<>> fields;
    for (auto name : kColumns) {
      auto it = obj.find(std::string(name));
      if (it == obj.end() || it->is_null()) continue;
      if (it->is_string()) {
        fields[std::string(name)] = it->get<std::string>();
      } else if (it->is_number_integer()) {
        fields[std::string(name)] = std::to_string(it->get<std::int64_t>());
      } else if (it->is_number()) {
        fields[std::string(name)] = format_double(it->get<double>());
      } else {
        b.fail(name, "unsupported JSON type");
      }
    }
    auto r = record_from_fields(fields, b);
    validate_with_line(r, line_no);
    records.push_back(std::move(r));
  }
  return group(std::move(records));
}

}  // namespace

std::vector<ScaledFamily> ingest(std::istream& in, TableFormat format) {
  return format == TableFormat::kCsv ? ingest_csv(in) : ingest_jsonl(in);
}

std::vector<ScaledFamily> ingest_string(std::string_view text, TableFormat format) {
  std::istringstream in{std::string(text)};
  return ingest(in, format);
}

TableFormat format_for_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") ? TableFormat::kJsonl
                                                                 : TableFormat::kCsv;
}

std::vector<ScaledFamily> ingest_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open input '" + path.string() + "'");
  return ingest(in, format_for_path(path));
}

// --- serialization ---------------------------------------------------------

void serialize(std::ostream& out, std::span<const ScaledFamily> families, TableFormat format) {
  if (format == TableFormat::kCsv) {
    for (std::size_t i = 0; i < std::size(kColumns); ++i)
      out << (i ? "," : "") << kColumns[i];
    out << '\n';
    for (const auto& fam : families) {
      for (const auto& r : fam.records()) {
        out << csv_escape(r.family_id) << ',' << csv_escape(r.model_id) << ',' << r.num_params
            << ',' << r.tokens_seen << ',' << r.total_tokens << ',';
        if (r.seed) out << *r.seed;
        out << ',' << format_double(r.loss) << ',';
        if (r.flops) out << format_double(*r.flops);
        out << ',' << csv_escape(r.loss_corpus) << '\n';
      }
    }
    return;
  }
  for (const auto& fam : families) {
    for (const auto& r : fam.records()) {
      nlohmann::ordered_json j;
      j["family_id"] = r.family_id;
      j["model_id"] = r.model_id;
      j["num_params"] = r.num_params;
      j["tokens_seen"] = r.tokens_seen;
      j["total_tokens"] = r.total_tokens;
      if (r.seed) j["seed"] = *r.seed;
      j["loss"] = r.loss;
      if (r.flops) j["flops"] = *r.flops;
      if (!r.loss_corpus.empty()) j["loss_corpus"] = r.loss_corpus;
      out << j.dump() << '\n';
    }
  }
}

std::string serialize_string(std::span<const ScaledFamily> families, TableFormat format) {
  std::ostringstream os;
  serialize(os, families, format);
  return os.str();
}

// --- summaries -------------------------------------------------------------

FamilySummary family_summary(const ScaledFamily& family) {
  FamilySummary s;
  s.family_id = family.family_id();
  if (family.empty()) return s;
  s.num_runs = family.runs().size();
  s.num_sizes = family.num_sizes();
  s.num_checkpoints = family.size();
  const auto recs = family.records();
  auto [pmin, pmax] = std::minmax_element(recs.begin(), recs.end(), [](auto& a, auto& b) {
    return a.num_params < b.num_params;
  });
  auto [tmin, tmax] = std::minmax_element(recs.begin(), recs.end(), [](auto& a, auto& b) {
    return a.tokens_seen < b.tokens_seen;
  });
  s.min_params = pmin->num_params;
  s.max_params = pmax->num_params;
  s.min_tokens = tmin->tokens_seen;
  s.max_tokens = tmax->tokens_seen;
  s.corpora = family.corpora();
  return s;
}

ScaledFamily select_corpus(const ScaledFamily& family, std::string_view corpus) {
  auto out = family.filter([&](const CheckpointRecord& r) { return r.loss_corpus == corpus; });
  if (out.empty())
    throw DataError("family '" + family.family_id() + "' has no records for corpus '" +
                    std::string(corpus) + "'");
  return out;
}

void require_single_corpus(const ScaledFamily& family) {
  if (family.corpora().size() > 1)
    throw DataError("family '" + family.family_id() +
                    "' mixes loss corpora; select exactly one corpus");
}

}  // namespace scalaw
