#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mocotp/data.hpp"
#include "mocotp/error.hpp"

namespace mocotp::data {

namespace {

// A class is a bar-grid motif: cell period, bar length and thickness. Bar
// statistics (relative size, density) survive 90-degree rotation, while the
// canonical rendering is orientation-dependent, so rotational invariance has
// to be learned rather than being free.
struct Motif {
  int period;
  int len;
  int thick;
};

Motif motif_for_class(int c, int image_size) {
  static constexpr Motif kBase[8] = {{6, 5, 1}, {6, 1, 1}, {6, 3, 3}, {6, 3, 1},
                                     {10, 8, 2}, {10, 2, 2}, {10, 5, 5}, {10, 5, 2}};
  Motif m = kBase[c % 8];
  // Classes beyond the base table reuse shapes on a coarser grid.
  m.period += 4 * (c / 8);
  const double s = image_size / 32.0;
  if (s != 1.0) {
    m.period = std::max(3, static_cast<int>(std::lround(m.period * s)));
    m.len = std::max(1, static_cast<int>(std::lround(m.len * s)));
    m.thick = std::max(1, static_cast<int>(std::lround(m.thick * s)));
  }
  return m;
}

constexpr float kBackgroundLow = 0.18f;
constexpr float kBackgroundHigh = 0.26f;
constexpr float kForeground = 0.85f;

void draw_rect(Image& img, int y0, int x0, int h, int w, float value) {
  const int ya = std::max(0, y0);
  const int xa = std::max(0, x0);
  const int yb = std::min(img.height, y0 + h);
  const int xb = std::min(img.width, x0 + w);
  for (int c = 0; c < img.channels; ++c)
    for (int y = ya; y < yb; ++y)
      for (int x = xa; x < xb; ++x) img.at(c, y, x) = value;
}

Image render_view(int size, const Motif& m, int phase_y, int phase_x,
                  double nuisance, Rng view_rng) {
  Image img(3, size, size);
  // Mild vertical background gradient; identical for all classes.
  for (int y = 0; y < size; ++y) {
    const float bg = kBackgroundLow +
                     (kBackgroundHigh - kBackgroundLow) *
                         (size > 1 ? static_cast<float>(y) / (size - 1) : 0.0f);
    for (int c = 0; c < 3; ++c)
      for (int x = 0; x < size; ++x) img.at(c, y, x) = bg;
  }

  // Per-view translation of the motif grid.
  const int dy = static_cast<int>(std::lround(nuisance * view_rng.uniform(-3.0, 3.0)));
  const int dx = static_cast<int>(std::lround(nuisance * view_rng.uniform(-3.0, 3.0)));
  const int oy = ((phase_y + dy) % m.period + m.period) % m.period - m.period;
  const int ox = ((phase_x + dx) % m.period + m.period) % m.period - m.period;
  for (int y0 = oy; y0 < size; y0 += m.period)
    for (int x0 = ox; x0 < size; x0 += m.period)
      draw_rect(img, y0, x0, m.thick, m.len, kForeground);

  // Background clutter: foreground-colored specks that come and go between
  // timestamps.
  const int n_clutter =
      static_cast<int>(std::lround(nuisance * view_rng.uniform(3.0, 9.0)));
  for (int i = 0; i < n_clutter; ++i) {
    const int cy = static_cast<int>(view_rng.uniform_below(static_cast<std::uint64_t>(size)));
    const int cx = static_cast<int>(view_rng.uniform_below(static_cast<std::uint64_t>(size)));
    const int ch = 1 + static_cast<int>(view_rng.uniform_below(2));
    const int cw = 1 + static_cast<int>(view_rng.uniform_below(2));
    draw_rect(img, cy, cx, ch, cw, kForeground);
  }

  // Illumination drift plus sensor noise, then clamp to the pixel range.
  const float gain = static_cast<float>(1.0 + nuisance * view_rng.uniform(-0.5, 0.5));
  const float sigma = static_cast<float>(0.03 * nuisance);
  for (auto& v : img.pix) {
    float out = v * gain;
    if (sigma > 0.0f) out += sigma * static_cast<float>(view_rng.normal());
    v = std::clamp(out, 0.0f, 1.0f);
  }
  return img;
}

std::string class_name(int c) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "class_%02d", c);
  return buf;
}

}  // namespace

SyntheticDataset generate_synthetic_dataset(const SyntheticSpec& spec) {
  validate(spec);

  std::vector<std::string> vocab;
  vocab.reserve(static_cast<std::size_t>(spec.num_classes));
  for (int c = 0; c < spec.num_classes; ++c) vocab.push_back(class_name(c));

  const Rng root(spec.seed);
  std::vector<ImageRecord> records;
  SyntheticDataset out;

  for (int c = 0; c < spec.num_classes; ++c) {
    const Motif motif = motif_for_class(c, spec.image_size);
    for (int g = 0; g < spec.groups_per_class; ++g) {
      Rng group_rng = root.substream(static_cast<std::uint64_t>(c),
                                     static_cast<std::uint64_t>(g));
      // Persistent per-location grid phase; scaled by nuisance so strength 0
      // collapses every location of a class onto the canonical rendering.
      const int phase_y = static_cast<int>(
          std::lround(spec.nuisance_strength * group_rng.uniform(0.0, motif.period)));
      const int phase_x = static_cast<int>(
          std::lround(spec.nuisance_strength * group_rng.uniform(0.0, motif.period)));

      char loc[48];
      std::snprintf(loc, sizeof(loc), "loc_c%02d_g%03d", c, g);
      for (int t = 0; t < spec.views_per_group; ++t) {
        char id[64];
        std::snprintf(id, sizeof(id), "c%02d_g%03d_t%d", c, g, t);
        ImageRecord r;
        r.image_id = id;
        r.location_id = loc;
        r.timestamp = static_cast<std::int64_t>(t) * 86400;
        r.path = std::string("images/") + id + ".png";
        r.class_label = c;
        r.width = spec.image_size;
        r.height = spec.image_size;

        Image img = render_view(spec.image_size, motif, phase_y, phase_x,
                                spec.nuisance_strength,
                                group_rng.substream(0x7601u, static_cast<std::uint64_t>(t)));
        // Quantize now so in-memory pixels match the PNG round trip exactly.
        out.index_by_path.emplace(r.path, out.images.size());
        out.images.push_back(quantize_u8(img));
        records.push_back(std::move(r));
      }
    }
  }
  out.manifest = make_manifest(std::move(records), std::move(vocab));
  return out;
}

}  // namespace mocotp::data
