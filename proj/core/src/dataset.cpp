#include "amfir/dataset.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

#include "amfir/options.hpp"

namespace amfir {
namespace {

using Json = nlohmann::ordered_json;

std::string describe(const EmbeddingRecord& r) { return "record '" + r.id + "'"; }

bool all_finite(const Vector& v) { return v.allFinite(); }

Vector parse_vector(const Json& j, const char* field, std::size_t line) {
  const auto it = j.find(field);
  if (it == j.end() || !it->is_array()) {
    throw DataError("line " + std::to_string(line) + ": missing array field '" + field + "'");
  }
  Vector v(static_cast<Eigen::Index>(it->size()));
  Eigen::Index i = 0;
  for (const auto& x : *it) {
    if (!x.is_number()) {
      throw DataError("line " + std::to_string(line) + ": non-numeric entry in '" + field + "'");
    }
    v[i++] = x.get<double>();
  }
  return v;
}

Json vector_to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

template <typename T>
T required(const Json& j, const char* field, std::size_t line) {
  const auto it = j.find(field);
  if (it == j.end()) {
    throw DataError("line " + std::to_string(line) + ": missing field '" + field + "'");
  }
  try {
    return it->get<T>();
  } catch (const Json::exception&) {
    throw DataError("line " + std::to_string(line) + ": field '" + field + "' has the wrong type");
  }
}

bool blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace

MultimodalDataset::MultimodalDataset(DatasetMeta meta, std::vector<EmbeddingRecord> records)
    : meta_(meta), records_(std::move(records)) {
  if (meta_.dim_rgb < 1 || meta_.dim_flow < 1) {
    throw DataError("dataset dimensions must be >= 1");
  }
  if (meta_.num_classes < 1) throw DataError("dataset must have at least one class");

  by_class_.resize(static_cast<std::size_t>(meta_.num_classes));
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (!ids.insert(r.id).second) throw DataError("duplicate id '" + r.id + "'");
    if (r.rgb.size() != meta_.dim_rgb) {
      throw DataError("dimension mismatch in " + describe(r) + ": rgb has " +
                      std::to_string(r.rgb.size()) + " entries, expected " +
                      std::to_string(meta_.dim_rgb));
    }
    if (r.flow.size() != meta_.dim_flow) {
      throw DataError("dimension mismatch in " + describe(r) + ": flow has " +
                      std::to_string(r.flow.size()) + " entries, expected " +
                      std::to_string(meta_.dim_flow));
    }
    if (r.label < 0 || r.label >= meta_.num_classes) {
      throw DataError("label " + std::to_string(r.label) + " out of range in " + describe(r));
    }
    if (!all_finite(r.rgb) || !all_finite(r.flow)) {
      throw DataError("non-finite entry in " + describe(r));
    }
    by_class_[static_cast<std::size_t>(r.label)].push_back(i);
  }
  for (int k = 0; k < meta_.num_classes; ++k) {
    if (by_class_[static_cast<std::size_t>(k)].empty()) {
      throw DataError("class " + std::to_string(k) + " has no records");
    }
  }
}

std::span<const std::size_t> MultimodalDataset::class_members(int k) const {
  return by_class_.at(static_cast<std::size_t>(k));
}

bool MultimodalDataset::has_dominance() const {
  for (const auto& r : records_) {
    if (r.dominant) return true;
  }
  return false;
}

MultimodalDataset read_dataset(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<DatasetMeta> meta;
  std::vector<EmbeddingRecord> records;

  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw DataError("line " + std::to_string(line_no) + ": malformed record: " + e.what());
    }
    if (!j.is_object()) {
      throw DataError("line " + std::to_string(line_no) + ": expected an object");
    }

    if (!meta) {
      if (j.value("kind", std::string{}) != "meta") {
        throw DataError("line " + std::to_string(line_no) + ": first record must be the metadata record");
      }
      const int version = required<int>(j, "format_version", line_no);
      if (version != kDatasetFormatVersion) {
        throw DataError("unsupported dataset format_version " + std::to_string(version));
      }
      meta = DatasetMeta{required<int>(j, "dim_rgb", line_no), required<int>(j, "dim_flow", line_no),
                         required<int>(j, "num_classes", line_no)};
      continue;
    }

    EmbeddingRecord r;
    r.id = required<std::string>(j, "id", line_no);
    r.label = required<int>(j, "label", line_no);
    r.rgb = parse_vector(j, "rgb", line_no);
    r.flow = parse_vector(j, "flow", line_no);
    if (const auto it = j.find("dominant"); it != j.end() && !it->is_null()) {
      const auto tag = it->is_string() ? it->get<std::string>() : std::string{};
      if (tag == "r") {
        r.dominant = Modality::kRgb;
      } else if (tag == "f") {
        r.dominant = Modality::kFlow;
      } else {
        throw DataError("line " + std::to_string(line_no) + ": dominant must be \"r\" or \"f\"");
      }
    }
    records.push_back(std::move(r));
  }

  if (!meta) throw DataError("malformed input: no metadata record");
  return MultimodalDataset(*meta, std::move(records));
}

void write_dataset(const MultimodalDataset& dataset, std::ostream& out) {
  const auto& m = dataset.meta();
  Json meta = {{"kind", "meta"},
               {"dim_rgb", m.dim_rgb},
               {"dim_flow", m.dim_flow},
               {"num_classes", m.num_classes},
               {"format_version", kDatasetFormatVersion}};
  out << meta.dump() << '\n';
  for (const auto& r : dataset.records()) {
    Json j = {{"id", r.id}, {"label", r.label}, {"rgb", vector_to_json(r.rgb)},
              {"flow", vector_to_json(r.flow)}};
    if (r.dominant) j["dominant"] = to_string(*r.dominant);
    out << j.dump() << '\n';
  }
}

MultimodalDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file " + path.string());
  return read_dataset(in);
}

void save_dataset(const MultimodalDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write dataset file " + path.string());
  write_dataset(dataset, out);
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace amfir
