#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "mocotp/contrast.hpp"
#include "mocotp/error.hpp"

using namespace mocotp;
using namespace mocotp::moco;
namespace fs = std::filesystem;

namespace {

std::vector<double> random_unit(int d, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(d));
  double sq = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    sq += x * x;
  }
  const double norm = std::sqrt(sq);
  for (auto& x : v) x /= norm;
  return v;
}

Tensor keys_tensor(const std::vector<std::vector<double>>& rows) {
  Tensor t({static_cast<int>(rows.size()), static_cast<int>(rows[0].size())});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      t.at(static_cast<int>(i), static_cast<int>(j)) = static_cast<float>(rows[i][j]);
  return t;
}

EncoderConfig tiny_encoder() {
  EncoderConfig cfg;
  cfg.input_size = 16;
  cfg.stage_channels = {4, 8};
  cfg.proj_hidden = 8;
  cfg.embedding_dim = 8;
  return cfg;
}

aug::AugmentationConfig tiny_aug() {
  aug::AugmentationConfig cfg;
  cfg.output_size = 16;
  cfg.crop_scale_low = 0.6;
  return cfg;
}

}  // namespace

TEST_CASE("info_nce with no negatives is exactly zero") {
  Rng rng(1);
  const auto q = random_unit(16, rng);
  const auto k = random_unit(16, rng);
  CHECK(info_nce(q, k, {}, 0.2) == 0.0);
}

TEST_CASE("equal logits give ln(N+1) for any temperature") {
  Rng rng(2);
  for (int n : {1, 7, 63}) {
    const auto q = random_unit(16, rng);
    const auto k = random_unit(16, rng);
    // negatives identical to the positive key -> all logits equal
    const std::vector<std::vector<double>> negatives(static_cast<std::size_t>(n), k);
    for (double tau : {0.07, 0.2, 1.0})
      CHECK(info_nce(q, k, negatives, tau) ==
            doctest::Approx(std::log(n + 1.0)).epsilon(1e-9));
  }
  // the spec's spot value
  Rng rng2(3);
  const auto q = random_unit(8, rng2);
  const auto k = random_unit(8, rng2);
  CHECK(info_nce(q, k, std::vector<std::vector<double>>(7, k), 0.2) ==
        doctest::Approx(2.0794415416798357).epsilon(1e-9));
}

TEST_CASE("info_nce gradient matches central finite differences") {
  Rng rng(4);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 16;
    const int n = static_cast<int>(rng.uniform_below(17));
    auto q = random_unit(d, rng);
    const auto k = random_unit(d, rng);
    std::vector<std::vector<double>> negatives;
    for (int i = 0; i < n; ++i) negatives.push_back(random_unit(d, rng));
    const double tau = 0.1 + rng.uniform() * 0.9;

    std::vector<double> dq(static_cast<std::size_t>(d));
    info_nce_grad(q, k, negatives, tau, dq);

    const double h = 1e-5;
    double num_sq = 0.0, diff_sq = 0.0;
    for (int i = 0; i < d; ++i) {
      const double saved = q[static_cast<std::size_t>(i)];
      q[static_cast<std::size_t>(i)] = saved + h;
      const double up = info_nce(q, k, negatives, tau);
      q[static_cast<std::size_t>(i)] = saved - h;
      const double down = info_nce(q, k, negatives, tau);
      q[static_cast<std::size_t>(i)] = saved;
      const double numeric = (up - down) / (2.0 * h);
      num_sq += numeric * numeric;
      const double diff = numeric - dq[static_cast<std::size_t>(i)];
      diff_sq += diff * diff;
    }
    if (num_sq > 0.0) worst = std::max(worst, std::sqrt(diff_sq / num_sq));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("loss stays finite for logits up to +-50/tau") {
  std::vector<double> q{250.0, 0.0};
  std::vector<double> k{1.0, 0.0};
  std::vector<std::vector<double>> negatives{{-1.0, 0.0}, {1.0, 0.0}};
  const double loss = info_nce(q, k, negatives, 0.2);  // logits +-1250
  CHECK(std::isfinite(loss));
  CHECK(loss >= 0.0);
}

TEST_CASE("masked loss equals the collision-filtered plain loss") {
  Rng rng(5);
  const int d = 8;
  MemoryQueue queue(8, d);
  std::vector<std::vector<double>> keys;
  const std::vector<std::string> groups{"g0", "g1", "g0", "g2",
                                        "g0", "g3", "g4", "g5"};
  for (int i = 0; i < 8; ++i) keys.push_back(random_unit(d, rng));
  queue.enqueue(keys_tensor(keys), groups);

  const auto q = random_unit(d, rng);
  const auto k = random_unit(d, rng);
  const double masked = masked_info_nce(q, "g0", k, queue, 0.2);

  std::vector<std::vector<double>> survivors;
  for (int i = 0; i < 8; ++i) {
    std::vector<double> stored(queue.key(i).begin(), queue.key(i).end());
    if (groups[static_cast<std::size_t>(i)] != "g0") survivors.push_back(stored);
  }
  REQUIRE(survivors.size() == 5);
  CHECK(masked == doctest::Approx(info_nce(q, k, survivors, 0.2)).epsilon(1e-9));

  // no collisions at all -> identical to the plain loss over the queue
  const double unmasked = masked_info_nce(q, "none", k, queue, 0.2);
  std::vector<std::vector<double>> all;
  for (int i = 0; i < 8; ++i)
    all.emplace_back(queue.key(i).begin(), queue.key(i).end());
  CHECK(unmasked == doctest::Approx(info_nce(q, k, all, 0.2)).epsilon(1e-9));
}

TEST_CASE("full-collision queue drives the loss to zero") {
  Rng rng(6);
  const int d = 8;
  MemoryQueue queue(4, d);
  std::vector<std::vector<double>> keys;
  for (int i = 0; i < 4; ++i) keys.push_back(random_unit(d, rng));
  queue.enqueue(keys_tensor(keys), {"same", "same", "same", "same"});
  const auto q = random_unit(d, rng);
  const auto k = random_unit(d, rng);
  CHECK(masked_info_nce(q, "same", k, queue, 0.2) == 0.0);
}

TEST_CASE("masking never increases the loss") {
  Rng rng(7);
  const int d = 8;
  for (int trial = 0; trial < 200; ++trial) {
    const int fill = 1 + static_cast<int>(rng.uniform_below(16));
    MemoryQueue queue(16, d);
    std::vector<std::vector<double>> keys;
    std::vector<std::string> groups;
    for (int i = 0; i < fill; ++i) {
      keys.push_back(random_unit(d, rng));
      groups.push_back("g" + std::to_string(rng.uniform_below(4)));
    }
    queue.enqueue(keys_tensor(keys), groups);
    const auto q = random_unit(d, rng);
    const auto k = random_unit(d, rng);
    const double tau = 0.1 + rng.uniform();

    std::vector<std::vector<double>> all;
    for (int i = 0; i < queue.fill_count(); ++i)
      all.emplace_back(queue.key(i).begin(), queue.key(i).end());
    const double unmasked = info_nce(q, k, all, tau);
    const double masked = masked_info_nce(q, "g0", k, queue, tau);
    CHECK(masked <= unmasked + 1e-12);
  }
}

TEST_CASE("masked gradient agrees with the filtered plain gradient") {
  Rng rng(8);
  const int d = 8;
  MemoryQueue queue(8, d);
  std::vector<std::vector<double>> keys;
  std::vector<std::string> groups;
  for (int i = 0; i < 8; ++i) {
    keys.push_back(random_unit(d, rng));
    groups.push_back(i % 3 == 0 ? "hit" : "g" + std::to_string(i));
  }
  queue.enqueue(keys_tensor(keys), groups);
  const auto q = random_unit(d, rng);
  const auto k = random_unit(d, rng);

  std::vector<double> dq_masked(static_cast<std::size_t>(d));
  masked_info_nce_grad(q, "hit", k, queue, 0.2, dq_masked);

  std::vector<std::vector<double>> survivors;
  for (int i = 0; i < 8; ++i)
    if (groups[static_cast<std::size_t>(i)] != "hit")
      survivors.emplace_back(queue.key(i).begin(), queue.key(i).end());
  std::vector<double> dq_plain(static_cast<std::size_t>(d));
  info_nce_grad(q, k, survivors, 0.2, dq_plain);
  for (int i = 0; i < d; ++i)
    CHECK(dq_masked[static_cast<std::size_t>(i)] ==
          doctest::Approx(dq_plain[static_cast<std::size_t>(i)]).epsilon(1e-9));
}

TEST_CASE("queue pointer and fill arithmetic") {
  Rng rng(9);
  MemoryQueue queue(8, 4);
  std::vector<std::vector<double>> batch;
  for (int i = 0; i < 3; ++i) batch.push_back(random_unit(4, rng));
  queue.enqueue(keys_tensor(batch), {"a", "b", "c"});
  CHECK(queue.fill_count() == 3);
  CHECK(queue.write_pointer() == 3);

  // full wrap returns the pointer to its original slot
  MemoryQueue full(8, 4);
  std::vector<std::vector<double>> eight;
  std::vector<std::string> ids;
  for (int i = 0; i < 8; ++i) {
    eight.push_back(random_unit(4, rng));
    ids.push_back("x" + std::to_string(i));
  }
  full.enqueue(keys_tensor(eight), ids);
  const int before = full.write_pointer();
  full.enqueue(keys_tensor(eight), ids);
  CHECK(full.write_pointer() == before);
  CHECK(full.fill_count() == 8);

  CHECK_THROWS_AS(queue.enqueue(Tensor({9, 4}), std::vector<std::string>(9, "z")),
                  ContractError);
}

TEST_CASE("four quarter-batches evict in arrival order") {
  Rng rng(10);
  MemoryQueue queue(8, 4);
  for (int round = 0; round < 4; ++round) {
    std::vector<std::vector<double>> batch;
    std::vector<std::string> ids;
    for (int i = 0; i < 4; ++i) {
      batch.push_back(random_unit(4, rng));
      ids.push_back("round" + std::to_string(round));
    }
    queue.enqueue(keys_tensor(batch), ids);
    if (round == 1) {
      CHECK(queue.group_id(0) == "round0");
      CHECK(queue.group_id(4) == "round1");
    }
    if (round == 2) {
      // third enqueue overwrote the first batch's slots
      CHECK(queue.group_id(0) == "round2");
      CHECK(queue.group_id(4) == "round1");
    }
  }
  CHECK(queue.group_id(4) == "round3");
}

TEST_CASE("fifo eviction matches an age-tracking oracle") {
  Rng rng(11);
  const int capacity = 12, d = 4;
  for (int trial = 0; trial < 300; ++trial) {
    MemoryQueue queue(capacity, d);
    std::vector<std::string> oracle;  // oldest first
    int counter = 0;
    const int rounds = 1 + static_cast<int>(rng.uniform_below(8));
    for (int r = 0; r < rounds; ++r) {
      const int batch = 1 + static_cast<int>(rng.uniform_below(
                                static_cast<std::uint64_t>(capacity)));
      std::vector<std::vector<double>> keys;
      std::vector<std::string> ids;
      for (int i = 0; i < batch; ++i) {
        keys.push_back(random_unit(d, rng));
        ids.push_back("k" + std::to_string(counter++));
        oracle.push_back(ids.back());
        if (oracle.size() > static_cast<std::size_t>(capacity))
          oracle.erase(oracle.begin());
      }
      queue.enqueue(keys_tensor(keys), ids);

      REQUIRE(queue.fill_count() == static_cast<int>(oracle.size()));
      // walk queue slots from oldest to newest
      const int fill = queue.fill_count();
      const int start = fill < capacity ? 0 : queue.write_pointer();
      for (int age = 0; age < fill; ++age)
        CHECK(queue.group_id((start + age) % capacity) ==
              oracle[static_cast<std::size_t>(age)]);
    }
  }
}

TEST_CASE("ema_update closed form and degenerate momenta") {
  const EncoderConfig cfg = tiny_encoder();
  EncoderState state(cfg, Rng(12));
  for (auto* p : state.query.params()) p->value.fill(4.0f);
  for (auto* p : state.key.params()) p->value.fill(2.0f);

  ema_update(state, 0.999);
  for (auto* p : state.key.params())
    for (float v : p->value.data) CHECK(v == doctest::Approx(2.002f));
  for (auto* p : state.query.params())
    for (float v : p->value.data) CHECK(v == 4.0f);

  // m = 1 freezes, m = 0 copies
  EncoderState frozen(cfg, Rng(13));
  for (auto* p : frozen.key.params()) p->value.fill(7.0f);
  ema_update(frozen, 1.0);
  for (auto* p : frozen.key.params())
    for (float v : p->value.data) CHECK(v == 7.0f);
  ema_update(frozen, 0.0);
  auto qp = frozen.query.params();
  auto kp = frozen.key.params();
  for (std::size_t i = 0; i < qp.size(); ++i) CHECK(kp[i]->value.data == qp[i]->value.data);
}

TEST_CASE("iterated ema contracts the gap geometrically") {
  const EncoderConfig cfg = tiny_encoder();
  EncoderState state(cfg, Rng(14));
  for (auto* p : state.query.params()) p->value.fill(1.0f);
  for (auto* p : state.key.params()) p->value.fill(0.0f);
  const double m = 0.5;
  double expected_gap = 1.0;
  for (int iter = 0; iter < 3; ++iter) {
    ema_update(state, m);
    expected_gap *= m;
    for (auto* p : state.key.params())
      for (float v : p->value.data)
        CHECK(std::abs((1.0 - v) - expected_gap) < 1e-6);
  }
}

TEST_CASE("cosine schedule endpoints and midpoint") {
  CHECK(cosine_lr(0, 100, 0.03) == doctest::Approx(0.03).epsilon(1e-12));
  CHECK(std::abs(cosine_lr(100, 100, 0.03)) < 1e-12);
  CHECK(cosine_lr(50, 100, 0.03) == doctest::Approx(0.015).epsilon(1e-12));
  CHECK_THROWS_AS(cosine_lr(5, 0, 0.1), ContractError);
  CHECK_THROWS_AS(cosine_lr(-1, 10, 0.1), ContractError);
}

TEST_CASE("normalized embeddings shrug off a projection rescale") {
  const EncoderConfig cfg = tiny_encoder();
  Encoder enc(cfg, Rng(15));
  Rng rng(16);
  Tensor batch({2, 3, 16, 16});
  for (auto& v : batch.data) v = static_cast<float>(rng.uniform());
  const Tensor before = enc.forward(batch, false);

  // doubling the last projection layer scales pre-norm activations by 2
  auto params = enc.params();
  for (auto* p : params) {
    if (p->name == "proj.fc2.weight" || p->name == "proj.fc2.bias")
      for (auto& v : p->value.data) v *= 2.0f;
  }
  const Tensor after = enc.forward(batch, false);
  for (std::size_t i = 0; i < before.data.size(); ++i)
    CHECK(after.data[i] == doctest::Approx(before.data[i]).epsilon(1e-4));
}

TEST_CASE("one frozen pretrain step leaves parameters alone and fills the queue") {
  data::SyntheticSpec spec{2, 4, 2, 16, 0.5, 31};
  auto ds = data::generate_synthetic_dataset(spec);
  auto store = data::ImageStore::from_synthetic(ds);

  ContrastiveConfig cfg;
  cfg.temperature = 0.2;
  cfg.queue_capacity = 32;
  cfg.batch_size = 16;
  cfg.ema_momentum = 1.0;  // frozen key encoder
  cfg.base_lr = 0.0;       // frozen query encoder
  cfg.epochs = 1;
  cfg.embedding_dim = 8;

  const EncoderConfig enc_cfg = tiny_encoder();
  EncoderState reference(enc_cfg, Rng(77).substream("init"));

  auto result = pretrain(ds.manifest, store, cfg, enc_cfg, tiny_aug(), 77);
  auto rp = reference.query.params();
  auto qp = result.state.query.params();
  auto kp = result.state.key.params();
  for (std::size_t i = 0; i < rp.size(); ++i) {
    CHECK(qp[i]->value.data == rp[i]->value.data);
    CHECK(kp[i]->value.data == rp[i]->value.data);
    // no gradient ever reaches the key encoder
    for (float g : kp[i]->grad.data) CHECK(g == 0.0f);
  }
  REQUIRE(result.log.size() == 1);
  CHECK(result.log[0].queue_fill == 16);
}

TEST_CASE("step-0 loss sits near ln(fill+1) under near-uniform similarities") {
  data::SyntheticSpec spec{4, 4, 2, 16, 0.5, 41};
  auto ds = data::generate_synthetic_dataset(spec);
  auto store = data::ImageStore::from_synthetic(ds);

  // Realistic embedding width so random dot products concentrate near zero.
  EncoderConfig enc_cfg = tiny_encoder();
  enc_cfg.embedding_dim = 64;
  enc_cfg.proj_hidden = 64;
  const int d = enc_cfg.embedding_dim;
  Encoder enc(enc_cfg, Rng(5));
  Rng key_rng(6);
  const int fill = 64;
  MemoryQueue queue(fill, d);
  std::vector<std::vector<double>> keys;
  std::vector<std::string> ids;
  for (int i = 0; i < fill; ++i) {
    keys.push_back(random_unit(d, key_rng));
    ids.push_back("noise" + std::to_string(i));
  }
  queue.enqueue(keys_tensor(keys), ids);

  std::vector<Image> views;
  std::vector<std::string> groups;
  for (int i = 0; i < 16; ++i) {
    const auto& g = ds.manifest.groups[static_cast<std::size_t>(i)];
    views.push_back(aug::eval_view(ds.image_for_path(g.records[0].path), 16));
    groups.push_back(g.location_id);
  }
  const Tensor q = enc.forward(to_batch(views), false);
  double mean_loss = 0.0;
  for (int b = 0; b < 16; ++b) {
    std::vector<double> qrow(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) qrow[static_cast<std::size_t>(j)] = q.at(b, j);
    // positive drawn like the untrained key population
    const auto krow = random_unit(d, key_rng);
    mean_loss += masked_info_nce(qrow, groups[static_cast<std::size_t>(b)], krow,
                                 queue, 0.2);
  }
  mean_loss /= 16.0;
  const double expected = std::log(fill + 1.0);
  CHECK(std::abs(mean_loss - expected) < 0.2 * expected);
}

TEST_CASE("pretrain is deterministic given the seed") {
  data::SyntheticSpec spec{2, 4, 2, 16, 0.5, 51};
  auto ds = data::generate_synthetic_dataset(spec);
  auto store = data::ImageStore::from_synthetic(ds);

  ContrastiveConfig cfg;
  cfg.queue_capacity = 16;
  cfg.batch_size = 8;
  cfg.ema_momentum = 0.9;
  cfg.base_lr = 0.05;
  cfg.epochs = 2;
  cfg.embedding_dim = 8;

  auto r1 = pretrain(ds.manifest, store, cfg, tiny_encoder(), tiny_aug(), 99);
  auto r2 = pretrain(ds.manifest, store, cfg, tiny_encoder(), tiny_aug(), 99);
  REQUIRE(r1.log.size() == r2.log.size());
  for (std::size_t i = 0; i < r1.log.size(); ++i)
    CHECK(r1.log[i].mean_loss == r2.log[i].mean_loss);
  auto p1 = r1.state.query.params();
  auto p2 = r2.state.query.params();
  for (std::size_t i = 0; i < p1.size(); ++i)
    CHECK(p1[i]->value.data == p2[i]->value.data);
}

TEST_CASE("symmetric loss variant trains and stays deterministic") {
  data::SyntheticSpec spec{2, 4, 2, 16, 0.5, 61};
  auto ds = data::generate_synthetic_dataset(spec);
  auto store = data::ImageStore::from_synthetic(ds);

  ContrastiveConfig cfg;
  cfg.queue_capacity = 16;
  cfg.batch_size = 8;
  cfg.ema_momentum = 0.9;
  cfg.base_lr = 0.02;
  cfg.epochs = 2;
  cfg.embedding_dim = 8;
  cfg.symmetric_loss = true;

  auto r1 = pretrain(ds.manifest, store, cfg, tiny_encoder(), tiny_aug(), 7);
  auto r2 = pretrain(ds.manifest, store, cfg, tiny_encoder(), tiny_aug(), 7);
  REQUIRE(r1.log.size() == 2);
  for (const auto& e : r1.log) CHECK(std::isfinite(e.mean_loss));
  for (std::size_t i = 0; i < r1.log.size(); ++i)
    CHECK(r1.log[i].mean_loss == r2.log[i].mean_loss);
  CHECK(r1.log.back().queue_fill == 16);
}

TEST_CASE("checkpoints round-trip bit-exactly and reject corruption") {
  const auto dir = fs::temp_directory_path() / "mocotp_ckpt";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto path = (dir / "state.bin").string();

  const EncoderConfig enc_cfg = tiny_encoder();
  EncoderState state(enc_cfg, Rng(61));
  ContrastiveConfig cfg;
  cfg.embedding_dim = enc_cfg.embedding_dim;
  cfg.queue_capacity = 16;
  cfg.batch_size = 8;
  checkpoint_save(path, state, cfg, tiny_aug());

  Checkpoint loaded = checkpoint_load(path);
  CHECK(loaded.encoder_config == enc_cfg);
  CHECK(loaded.contrastive_config.queue_capacity == 16);
  auto sp = state.query.params();
  auto lp = loaded.state.query.params();
  for (std::size_t i = 0; i < sp.size(); ++i)
    CHECK(sp[i]->value.data == lp[i]->value.data);
  auto sk = state.key.params();
  auto lk = loaded.state.key.params();
  for (std::size_t i = 0; i < sk.size(); ++i)
    CHECK(sk[i]->value.data == lk[i]->value.data);

  // truncation -> error, no partial state
  const auto truncated = (dir / "trunc.bin").string();
  {
    std::ifstream in(path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    std::ofstream out(truncated, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(checkpoint_load(truncated), FormatError);

  // version bump -> explicit incompatibility
  const auto versioned = (dir / "future.bin").string();
  {
    std::ifstream in(path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    bytes[4] = 9;  // version field follows the 4-byte magic
    std::ofstream out(versioned, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  try {
    checkpoint_load(versioned);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
}

TEST_CASE("config invariants catch bad values") {
  ContrastiveConfig cfg;
  cfg.embedding_dim = 8;
  cfg.queue_capacity = 15;
  cfg.batch_size = 8;
  CHECK_THROWS_AS(validate(cfg), ContractError);  // K not a multiple of batch
  cfg.queue_capacity = 16;
  cfg.temperature = 0.0;
  CHECK_THROWS_AS(validate(cfg), ContractError);
  cfg.temperature = 0.2;
  cfg.schedule = "step";
  CHECK_THROWS_AS(validate(cfg), ContractError);
}
