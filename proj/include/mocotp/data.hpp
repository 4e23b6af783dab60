#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mocotp/image.hpp"
#include "mocotp/rng.hpp"

namespace mocotp::data {

struct ImageRecord {
  std::string image_id;
  std::string location_id;
  std::int64_t timestamp = 0;
  std::string path;
  std::optional<int> class_label;  // index into Manifest::class_vocabulary
  int width = 0;
  int height = 0;
};

// Images of one geographic location across acquisition times. Records are
// kept sorted ascending by timestamp, ties broken by image_id.
struct TemporalGroup {
  std::string location_id;
  std::vector<ImageRecord> records;
};

struct Manifest {
  std::vector<TemporalGroup> groups;  // sorted by location_id
  std::vector<std::string> class_vocabulary;

  std::size_t record_count() const;
  std::vector<const ImageRecord*> all_records() const;
};

// Groups flat records by location, sorts, and validates all invariants
// (unique image ids, positive dimensions, labels inside the vocabulary).
Manifest make_manifest(std::vector<ImageRecord> records,
                       std::vector<std::string> class_vocabulary);

// Line-delimited JSON: header line carries the class vocabulary, then one
// record object per line. Labels are stored as class names (or null).
Manifest load_manifest(const std::string& path);
void save_manifest(const Manifest& manifest, const std::string& path);

// Uniformly picks a query record, then a partner from the same group at a
// different timestamp. Single-record groups degrade to (r, r).
std::pair<ImageRecord, ImageRecord> sample_temporal_pair(
    const TemporalGroup& group, Rng& rng);

// Partner for a fixed query. Prefers records at a different timestamp; if
// every record shares the query's timestamp, falls back to a different
// image_id; a singleton group returns the query itself.
ImageRecord sample_temporal_partner(const TemporalGroup& group,
                                    std::size_t query_index, Rng& rng);

// Without-replacement subsample keeping round(fraction * n_c) records per
// class, floored at 1 for any class that had records.
Manifest stratified_label_subset(const Manifest& manifest, double fraction,
                                 Rng& rng);

// Splits whole groups into train/val, stratified by the class of each
// group's first record, so no location leaks across the split.
std::pair<Manifest, Manifest> split_by_groups(const Manifest& manifest,
                                              double val_fraction, Rng& rng);

struct SyntheticSpec {
  int num_classes = 8;
  int groups_per_class = 30;
  int views_per_group = 4;
  int image_size = 32;
  double nuisance_strength = 0.5;
  std::uint64_t seed = 0;
};

void validate(const SyntheticSpec& spec);

struct SyntheticDataset {
  Manifest manifest;
  std::vector<Image> images;  // parallel to manifest record iteration order
  std::unordered_map<std::string, std::size_t> index_by_path;

  const Image& image_for_path(const std::string& path) const;
};

// Renders a temporal scene collection: each location carries a persistent
// class-determining bar-grid motif; nuisance_strength drives brightness
// drift, background clutter and small translations across timestamps.
// Deterministic in spec.seed.
SyntheticDataset generate_synthetic_dataset(const SyntheticSpec& spec);

// Writes <dir>/manifest.jsonl plus <dir>/images/*.png (8-bit rasters).
void save_synthetic_dataset(const SyntheticDataset& dataset,
                            const std::string& dir);

// Loads record images on demand and caches them. Relative record paths
// resolve against `root`. put() preseeds the cache so fully in-memory
// datasets never touch disk.
class ImageStore {
 public:
  explicit ImageStore(std::string root = "");

  const Image& get(const ImageRecord& record);
  void put(const std::string& path, Image img);
  static ImageStore from_synthetic(const SyntheticDataset& dataset);

 private:
  std::string root_;
  std::unordered_map<std::string, Image> cache_;
};

}  // namespace mocotp::data
