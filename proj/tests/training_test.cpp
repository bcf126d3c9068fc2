#include "gstpp/training.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gstpp/kmeans.hpp"
#include "gstpp/synthetic.hpp"
#include "test_util.hpp"

using namespace gstpp;
using namespace gstpp::testutil;

namespace {

Dataset two_cluster_data(int n_seq, double horizon, uint64_t seed) {
  SyntheticSpec spec;
  spec.mu = 1;
  spec.horizon = horizon;
  spec.n_sequences = n_seq;
  spec.seed = seed;
  spec.clusters = {{0.5, -2, 0, 0.5, 0.5}, {0.5, 2, 0, 0.5, 0.5}};
  return generate(spec);
}

TrainConfig micro_config() {
  TrainConfig cfg;
  cfg.model.K = 4;
  cfg.model.d_model = 8;
  cfg.model.d_embed = 4;
  cfg.model.m_layers = 2;
  cfg.model.t_proj = 2;
  cfg.model.h_max = 0.25;
  cfg.epochs = 50;
  cfg.batch_size = 4;
  cfg.patience = 100;
  cfg.base_lr = 0.01;
  cfg.min_lr = 1e-4;
  cfg.weight_decay = 1e-5;
  cfg.val_frac = 0;
  cfg.seed = 3;
  cfg.model.init_seed = 3;
  cfg.threads = 2;
  return cfg;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("kmeans anchor initialization") {
  SUBCASE("K=1 returns the centroid") {
    std::vector<std::array<double, 2>> pts = {{0, 0}, {2, 0}, {1, 3}};
    Tensor c = kmeans_centroids(pts, 1, 5);
    CHECK(c(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(c(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("two separated clouds match the exhaustive 2-means optimum") {
    std::vector<std::array<double, 2>> pts = {{0, 0},  {0.2, 0.1}, {-0.1, 0.3},
                                              {5, 5},  {5.3, 4.9}, {4.8, 5.2}};
    Tensor got = kmeans_centroids(pts, 2, 5);

    // brute force: all 2-partitions of 6 points
    double best_sse = 1e300;
    std::array<std::array<double, 2>, 2> best{};
    for (int mask = 1; mask < 63; ++mask) {
      std::array<double, 3> a{0, 0, 0}, b{0, 0, 0};  // sums + count
      for (int i = 0; i < 6; ++i) {
        auto& side = (mask >> i) & 1 ? a : b;
        side[0] += pts[static_cast<size_t>(i)][0];
        side[1] += pts[static_cast<size_t>(i)][1];
        side[2] += 1;
      }
      if (a[2] == 0 || b[2] == 0) continue;
      const std::array<double, 2> ca{a[0] / a[2], a[1] / a[2]}, cb{b[0] / b[2], b[1] / b[2]};
      double sse = 0;
      for (int i = 0; i < 6; ++i) {
        const auto& p = pts[static_cast<size_t>(i)];
        const auto& c = (mask >> i) & 1 ? ca : cb;
        sse += (p[0] - c[0]) * (p[0] - c[0]) + (p[1] - c[1]) * (p[1] - c[1]);
      }
      if (sse < best_sse) {
        best_sse = sse;
        best = {ca, cb};
      }
    }
    auto close = [&](int i, const std::array<double, 2>& c) {
      return std::fabs(got(i, 0) - c[0]) < 1e-6 && std::fabs(got(i, 1) - c[1]) < 1e-6;
    };
    const bool direct = close(0, best[0]) && close(1, best[1]);
    const bool swapped = close(0, best[1]) && close(1, best[0]);
    CHECK((direct || swapped));
  }

  SUBCASE("duplicated dataset gives identical centroids") {
    std::vector<std::array<double, 2>> pts = {{0, 0}, {1, 0}, {0, 1}, {4, 4}, {5, 4}, {4, 5}};
    std::vector<std::array<double, 2>> doubled = pts;
    doubled.insert(doubled.end(), pts.begin(), pts.end());
    Tensor a = kmeans_centroids(pts, 2, 5);
    Tensor b = kmeans_centroids(doubled, 2, 5);
    double match = 0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        if (std::fabs(a(i, 0) - b(j, 0)) < 1e-9 && std::fabs(a(i, 1) - b(j, 1)) < 1e-9)
          match += 1;
    CHECK(match >= 2);
  }

  SUBCASE("fewer than K distinct points is an error") {
    std::vector<std::array<double, 2>> pts = {{1, 1}, {1, 1}, {1, 1}};
    CHECK_THROWS_AS(kmeans_centroids(pts, 2, 5), DataError);
  }
}

TEST_CASE("training drops the loss on an overfit micro-dataset") {
  Dataset raw = two_cluster_data(20, 15, 11);
  Normalizer nz = Normalizer::fit(raw);
  Dataset data = nz.apply(raw);

  TrainConfig cfg = micro_config();
  Model model(cfg.model);
  place_anchors(model, data, AnchorInit::Kmeans, cfg.seed);

  const Metrics before = evaluate(model, data, cfg.threads);
  Trainer trainer(model, cfg);
  TrainResult res = trainer.fit(data, Dataset{}, nz, "");
  const Metrics after = evaluate(model, data, cfg.threads);

  CHECK(after.st_nll < before.st_nll - 1.0);
  REQUIRE(!res.history.empty());
  // recorded train metric of the last epoch equals a fresh evaluation
  const EpochRecord* last_train = nullptr;
  for (const auto& r : res.history)
    if (r.split == "train") last_train = &r;
  REQUIRE(last_train != nullptr);
  CHECK(last_train->metrics.st_nll == after.st_nll);
  CHECK(last_train->metrics.t_nll == after.t_nll);
}

TEST_CASE("no_graph ablation isolates anchors") {
  ModelConfig mc;
  mc.K = 4;
  mc.d_model = 6;
  mc.d_embed = 3;
  mc.h_max = 0.2;
  mc.ablation = Ablation::NoGraph;
  mc.init_seed = 7;
  Model model(mc);
  model.set_anchor_coords(Tensor::matrix(4, 2, {0, 0, 1, 0, 0, 1, 1, 1}));

  auto cross_grad = [](Model& m) {
    GradBuffers grads(m.params);
    ad::Tape tape;
    Bind bind(tape, m.params, &grads);
    auto cache = m.graph.build_cache(bind);
    auto s = m.dyn.initial(bind);
    s = m.dyn.integrate(bind, m.graph, cache, m.temporal_dec, s, 1.0, 0.2);
    s = m.dyn.jump(bind, m.graph, cache, s, real(0.4), real(0.6));
    s = m.dyn.integrate(bind, m.graph, cache, m.temporal_dec, s, 2.0, 0.2);
    tape.backward(ad::sum_sq(ad::row_of(s.z_l, 0)));
    double other = 0;
    const Tensor& g = grads.at(m.dyn.zl0_offset);
    for (int i = 1; i < 4; ++i)
      for (int j = 0; j < 6; ++j) other += std::fabs(static_cast<double>(g(i, j)));
    double self = 0;
    for (int j = 0; j < 6; ++j) self += std::fabs(static_cast<double>(g(0, j)));
    return std::pair<double, double>(self, other);
  };

  auto [self_ng, other_ng] = cross_grad(model);
  CHECK(self_ng > 1e-12);
  CHECK(other_ng == 0.0);

  ModelConfig full = mc;
  full.ablation = Ablation::Full;
  Model fmodel(full);
  fmodel.set_anchor_coords(Tensor::matrix(4, 2, {0, 0, 1, 0, 0, 1, 1, 1}));
  for (int m = 1; m <= fmodel.cfg.m_layers; ++m)
    for (int h = 0; h < 2; ++h) {
      Tensor& w = fmodel.params.value(fmodel.graph.sel_w[static_cast<size_t>(m) * 2 + h]);
      for (int i = 0; i < fmodel.cfg.d_model; ++i) w(i, i) = 1;
    }
  auto [self_f, other_f] = cross_grad(fmodel);
  CHECK(self_f > 1e-12);
  CHECK(other_f > 1e-12);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  Dataset raw = two_cluster_data(6, 10, 13);
  Normalizer nz = Normalizer::fit(raw);
  Dataset data = nz.apply(raw);

  TrainConfig cfg = micro_config();
  cfg.epochs = 2;
  Model model(cfg.model);
  place_anchors(model, data, AnchorInit::Kmeans, cfg.seed);
  Trainer trainer(model, cfg);
  trainer.fit(data, Dataset{}, nz, "");

  const std::string path = temp_path("gstpp_ckpt_roundtrip.bin");
  save_checkpoint(path, model, nz);

  LoadedCheckpoint head = read_checkpoint_header(path);
  Model loaded(head.cfg);
  Normalizer nz2;
  load_checkpoint_into(path, loaded, nz2);

  for (size_t e = 0; e < model.params.size(); ++e) {
    const Tensor& a = model.params.value(static_cast<int>(e));
    const Tensor& b = loaded.params.value(static_cast<int>(e));
    REQUIRE(a.shape == b.shape);
    for (long i = 0; i < a.numel(); ++i) CHECK(a.data[i] == b.data[i]);
  }
  CHECK(model.params.step == loaded.params.step);
  CHECK(nz2.t_scale == nz.t_scale);

  const Metrics m1 = evaluate(model, data, 1);
  const Metrics m2 = evaluate(loaded, data, 1);
  CHECK(m1.st_nll == m2.st_nll);
  CHECK(m1.t_nll == m2.t_nll);
  CHECK(m1.s_nll == m2.s_nll);
  std::remove(path.c_str());

  // dimension mismatch rejected
  ModelConfig other = cfg.model;
  other.d_model = 12;
  Model wrong(other);
  Normalizer nz3;
  const std::string path2 = temp_path("gstpp_ckpt_mismatch.bin");
  save_checkpoint(path2, model, nz);
  CHECK_THROWS_AS(load_checkpoint_into(path2, wrong, nz3), ConfigError);
  std::remove(path2.c_str());
}

TEST_CASE("seeded training is bitwise reproducible") {
  Dataset raw = two_cluster_data(10, 8, 17);
  Normalizer nz = Normalizer::fit(raw);
  Dataset data = nz.apply(raw);

  auto run = [&]() {
    TrainConfig cfg = micro_config();
    cfg.epochs = 3;
    cfg.val_frac = 0;
    Model model(cfg.model);
    place_anchors(model, data, AnchorInit::Kmeans, cfg.seed);
    Trainer trainer(model, cfg);
    return trainer.fit(data, Dataset{}, nz, "").history;
  };

  auto h1 = run(), h2 = run();
  REQUIRE(h1.size() == h2.size());
  for (size_t i = 0; i < h1.size(); ++i) {
    CHECK(h1[i].metrics.st_nll == h2[i].metrics.st_nll);
    CHECK(h1[i].metrics.t_nll == h2[i].metrics.t_nll);
    CHECK(h1[i].metrics.s_nll == h2[i].metrics.s_nll);
    CHECK(h1[i].lr == h2[i].lr);
  }
}

TEST_CASE("evaluation is pure and additive") {
  Dataset raw = two_cluster_data(8, 8, 19);
  Normalizer nz = Normalizer::fit(raw);
  Dataset data = nz.apply(raw);
  ModelConfig mc = micro_config().model;
  Model model(mc);
  place_anchors(model, data, AnchorInit::Kmeans, 3);

  const Metrics a = evaluate(model, data, 2);
  const Metrics b = evaluate(model, data, 2);
  CHECK(a.st_nll == b.st_nll);
  CHECK(a.st_nll == doctest::Approx(a.t_nll + a.s_nll).epsilon(1e-12));
}

TEST_CASE("metrics history file is deterministic") {
  Dataset raw = two_cluster_data(6, 6, 23);
  Normalizer nz = Normalizer::fit(raw);
  Dataset data = nz.apply(raw);

  auto run_to_file = [&](const std::string& path) {
    TrainConfig cfg = micro_config();
    cfg.epochs = 2;
    Model model(cfg.model);
    place_anchors(model, data, AnchorInit::Kmeans, cfg.seed);
    Trainer trainer(model, cfg);
    auto res = trainer.fit(data, Dataset{}, nz, "");
    write_metrics_csv(path, res.history);
  };
  const std::string p1 = temp_path("gstpp_hist1.csv"), p2 = temp_path("gstpp_hist2.csv");
  run_to_file(p1);
  run_to_file(p2);
  std::ifstream f1(p1), f2(p2);
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  CHECK(s1.str() == s2.str());
  CHECK(s1.str().find("epoch,split,st_nll,t_nll,s_nll,lr") == 0);
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}
