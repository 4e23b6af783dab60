#include "mocotp/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "mocotp/error.hpp"

namespace mocotp::data {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::size_t Manifest::record_count() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.records.size();
  return n;
}

std::vector<const ImageRecord*> Manifest::all_records() const {
  std::vector<const ImageRecord*> out;
  out.reserve(record_count());
  for (const auto& g : groups)
    for (const auto& r : g.records) out.push_back(&r);
  return out;
}

Manifest make_manifest(std::vector<ImageRecord> records,
                       std::vector<std::string> class_vocabulary) {
  std::unordered_set<std::string> seen_ids;
  for (const auto& r : records) {
    if (!seen_ids.insert(r.image_id).second)
      throw ValidationError("duplicate image_id: " + r.image_id);
    if (r.width < 1 || r.height < 1)
      throw ValidationError("non-positive dimensions for image " + r.image_id);
    if (r.class_label &&
        (*r.class_label < 0 ||
         *r.class_label >= static_cast<int>(class_vocabulary.size())))
      throw ValidationError("class_label out of vocabulary for image " +
                            r.image_id);
  }

  std::unordered_map<std::string, std::size_t> group_index;
  Manifest m;
  m.class_vocabulary = std::move(class_vocabulary);
  for (auto& r : records) {
    auto it = group_index.find(r.location_id);
    if (it == group_index.end()) {
      group_index.emplace(r.location_id, m.groups.size());
      m.groups.push_back(TemporalGroup{r.location_id, {}});
      it = group_index.find(r.location_id);
    }
    m.groups[it->second].records.push_back(std::move(r));
  }
  std::sort(m.groups.begin(), m.groups.end(),
            [](const TemporalGroup& a, const TemporalGroup& b) {
              return a.location_id < b.location_id;
            });
  for (auto& g : m.groups) {
    std::sort(g.records.begin(), g.records.end(),
              [](const ImageRecord& a, const ImageRecord& b) {
                if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                return a.image_id < b.image_id;
              });
  }
  return m;
}

namespace {

json record_to_json(const ImageRecord& r,
                    const std::vector<std::string>& vocab) {
  json j;
  j["image_id"] = r.image_id;
  j["location_id"] = r.location_id;
  j["timestamp"] = r.timestamp;
  j["path"] = r.path;
  if (r.class_label)
    j["label"] = vocab[static_cast<std::size_t>(*r.class_label)];
  else
    j["label"] = nullptr;
  j["width"] = r.width;
  j["height"] = r.height;
  return j;
}

ImageRecord record_from_json(const json& j,
                             const std::vector<std::string>& vocab,
                             std::size_t line_no) {
  for (const char* key :
       {"image_id", "location_id", "timestamp", "path", "label", "width", "height"}) {
    if (!j.contains(key))
      throw FormatError(std::string("manifest record missing key '") + key + "'",
                        line_no);
  }
  ImageRecord r;
  try {
    r.image_id = j.at("image_id").get<std::string>();
    r.location_id = j.at("location_id").get<std::string>();
    r.timestamp = j.at("timestamp").get<std::int64_t>();
    r.path = j.at("path").get<std::string>();
    r.width = j.at("width").get<int>();
    r.height = j.at("height").get<int>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad manifest record field: ") + e.what(),
                      line_no);
  }
  const auto& label = j.at("label");
  if (!label.is_null()) {
    if (!label.is_string())
      throw FormatError("label must be a class name or null", line_no);
    const std::string name = label.get<std::string>();
    const auto it = std::find(vocab.begin(), vocab.end(), name);
    if (it == vocab.end())
      throw ValidationError("unknown class name '" + name + "' at line " +
                            std::to_string(line_no));
    r.class_label = static_cast<int>(it - vocab.begin());
  }
  return r;
}

}  // namespace

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line))
    throw FormatError("manifest is empty, expected header line", 1);
  ++line_no;

  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError(std::string("unparseable manifest header: ") + e.what(), 1);
  }
  if (!header.is_object() || !header.contains("class_vocabulary") ||
      !header.at("class_vocabulary").is_array())
    throw FormatError("manifest header must carry a class_vocabulary array", 1);
  std::vector<std::string> vocab;
  for (const auto& v : header.at("class_vocabulary")) {
    if (!v.is_string())
      throw FormatError("class_vocabulary entries must be strings", 1);
    vocab.push_back(v.get<std::string>());
  }

  std::vector<ImageRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(std::string("unparseable manifest record: ") + e.what(),
                        line_no);
    }
    records.push_back(record_from_json(j, vocab, line_no));
  }
  return make_manifest(std::move(records), std::move(vocab));
}

void save_manifest(const Manifest& manifest, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path);
  json header;
  header["class_vocabulary"] = manifest.class_vocabulary;
  out << header.dump() << "\n";
  for (const auto& g : manifest.groups)
    for (const auto& r : g.records)
      out << record_to_json(r, manifest.class_vocabulary).dump() << "\n";
  if (!out) throw IoError("write failed: " + path);
}

std::pair<ImageRecord, ImageRecord> sample_temporal_pair(
    const TemporalGroup& group, Rng& rng) {
  if (group.records.empty())
    throw ContractError("sample_temporal_pair: empty group");
  const std::size_t qi = rng.uniform_below(group.records.size());
  ImageRecord query = group.records[qi];
  ImageRecord partner = sample_temporal_partner(group, qi, rng);
  return {std::move(query), std::move(partner)};
}

ImageRecord sample_temporal_partner(const TemporalGroup& group,
                                    std::size_t query_index, Rng& rng) {
  if (group.records.empty())
    throw ContractError("sample_temporal_partner: empty group");
  if (query_index >= group.records.size())
    throw ContractError("sample_temporal_partner: query index out of range");
  const ImageRecord& query = group.records[query_index];

  std::vector<std::size_t> candidates;
  candidates.reserve(group.records.size());
  for (std::size_t i = 0; i < group.records.size(); ++i)
    if (group.records[i].timestamp != query.timestamp) candidates.push_back(i);
  if (candidates.empty()) {
    // All records share the query's timestamp; fall back to any other record
    // before degrading to (r, r).
    for (std::size_t i = 0; i < group.records.size(); ++i)
      if (i != query_index) candidates.push_back(i);
  }
  if (candidates.empty()) return query;
  return group.records[candidates[rng.uniform_below(candidates.size())]];
}

Manifest stratified_label_subset(const Manifest& manifest, double fraction,
                                 Rng& rng) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw ContractError("stratified_label_subset: fraction must be in (0,1]");

  std::vector<std::vector<ImageRecord>> by_class(manifest.class_vocabulary.size());
  for (const auto& g : manifest.groups) {
    for (const auto& r : g.records) {
      if (!r.class_label)
        throw ContractError("stratified_label_subset: unlabeled record " +
                            r.image_id);
      by_class[static_cast<std::size_t>(*r.class_label)].push_back(r);
    }
  }

  std::vector<ImageRecord> kept;
  for (auto& bucket : by_class) {
    if (bucket.empty()) continue;
    const auto n_keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::llround(fraction * static_cast<double>(bucket.size()))));
    // Fisher-Yates over the bucket, take the head.
    for (std::size_t i = bucket.size(); i > 1; --i) {
      const std::size_t j = rng.uniform_below(i);
      std::swap(bucket[i - 1], bucket[j]);
    }
    kept.insert(kept.end(), bucket.begin(),
                bucket.begin() + static_cast<std::ptrdiff_t>(
                                     std::min(n_keep, bucket.size())));
  }
  return make_manifest(std::move(kept), manifest.class_vocabulary);
}

std::pair<Manifest, Manifest> split_by_groups(const Manifest& manifest,
                                              double val_fraction, Rng& rng) {
  if (val_fraction < 0.0 || val_fraction >= 1.0)
    throw ContractError("split_by_groups: val_fraction must be in [0,1)");

  // Strata keyed by the group's leading class label (-1 when unlabeled).
  std::unordered_map<int, std::vector<std::size_t>> strata;
  for (std::size_t gi = 0; gi < manifest.groups.size(); ++gi) {
    const auto& first = manifest.groups[gi].records.front();
    strata[first.class_label.value_or(-1)].push_back(gi);
  }
  std::vector<int> keys;
  for (const auto& [k, v] : strata) keys.push_back(k);
  std::sort(keys.begin(), keys.end());

  std::vector<ImageRecord> train, val;
  for (int key : keys) {
    auto& indices = strata[key];
    for (std::size_t i = indices.size(); i > 1; --i)
      std::swap(indices[i - 1], indices[rng.uniform_below(i)]);
    const auto n_val = static_cast<std::size_t>(
        std::llround(val_fraction * static_cast<double>(indices.size())));
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const auto& g = manifest.groups[indices[i]];
      auto& dst = (i < n_val) ? val : train;
      dst.insert(dst.end(), g.records.begin(), g.records.end());
    }
  }
  return {make_manifest(std::move(train), manifest.class_vocabulary),
          make_manifest(std::move(val), manifest.class_vocabulary)};
}

void validate(const SyntheticSpec& spec) {
  if (spec.num_classes < 1 || spec.groups_per_class < 1 ||
      spec.views_per_group < 1)
    throw ContractError("SyntheticSpec: all counts must be positive");
  if (spec.image_size < 16)
    throw ContractError("SyntheticSpec: image_size must be >= 16");
  if (spec.nuisance_strength < 0.0 || spec.nuisance_strength > 1.0)
    throw ContractError("SyntheticSpec: nuisance_strength must be in [0,1]");
}

const Image& SyntheticDataset::image_for_path(const std::string& path) const {
  const auto it = index_by_path.find(path);
  if (it == index_by_path.end())
    throw IoError("synthetic dataset has no image at path " + path);
  return images[it->second];
}

void save_synthetic_dataset(const SyntheticDataset& dataset,
                            const std::string& dir) {
  fs::create_directories(fs::path(dir) / "images");
  std::size_t i = 0;
  for (const auto& g : dataset.manifest.groups) {
    for (const auto& r : g.records) {
      write_png((fs::path(dir) / r.path).string(),
                dataset.image_for_path(r.path));
      ++i;
    }
  }
  save_manifest(dataset.manifest, (fs::path(dir) / "manifest.jsonl").string());
}

ImageStore::ImageStore(std::string root) : root_(std::move(root)) {}

const Image& ImageStore::get(const ImageRecord& record) {
  auto it = cache_.find(record.path);
  if (it != cache_.end()) return it->second;
  fs::path p(record.path);
  if (p.is_relative() && !root_.empty()) p = fs::path(root_) / p;
  try {
    auto [ins, ok] = cache_.emplace(record.path, read_png(p.string()));
    return ins->second;
  } catch (const Error& e) {
    throw IoError("image for record '" + record.image_id +
                  "' unreadable: " + e.what());
  }
}

void ImageStore::put(const std::string& path, Image img) {
  cache_[path] = std::move(img);
}

ImageStore ImageStore::from_synthetic(const SyntheticDataset& dataset) {
  ImageStore store;
  for (const auto& [path, idx] : dataset.index_by_path)
    store.put(path, dataset.images[idx]);
  return store;
}

}  // namespace mocotp::data
