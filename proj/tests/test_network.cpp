#include <doctest.h>

#include <bit>
#include <filesystem>
#include <numeric>
#include <random>

#include "gradcheck.hpp"
#include "lbcnn/network.hpp"
#include "lbcnn/poly_filters.hpp"
#include "support.hpp"

using namespace lbcnn;

namespace {

NormalizedOperator small_operator(PolyFamily family, const TriMesh& mesh = generate_torus(6, 10)) {
  return normalize(testing::with_lambda(assemble_laplace_beltrami(mesh)), family);
}

std::vector<double> random_theta(int K, int in, int out, std::uint64_t seed) {
  const Eigen::MatrixXd r = testing::random_matrix(static_cast<Eigen::Index>(K) * in * out, 1, seed);
  return {r.data(), r.data() + r.size()};
}

// Tiny two-layer model on a 60-vertex torus.
Model tiny_model(PolyFamily family, OperatorKind kind, std::uint64_t seed, int hidden = 16) {
  const LBOperator op = assemble_operator(generate_torus(6, 10), kind);
  NetworkSpec spec;
  spec.layers = {{4, 3, 1}, {4, 3, 1}};
  spec.hidden = hidden;
  return Model(spec, build_hierarchy(op, 2), family, seed);
}

LabeledSignals random_signals(Eigen::Index n_vertices, int samples, std::uint64_t seed) {
  LabeledSignals d;
  d.signals = testing::random_matrix(samples, n_vertices, seed);
  for (int i = 0; i < samples; ++i) {
    d.labels.push_back(i % 2);
    d.group_ids.push_back(i);
  }
  return d;
}

}  // namespace

TEST_CASE("conv_forward examples") {
  const NormalizedOperator op = small_operator(PolyFamily::laguerre);
  const Eigen::MatrixXd X = testing::random_matrix(60, 3, 1);

  std::vector<double> identity(2 * 3 * 3, 0.0);
  for (int i = 0; i < 3; ++i) identity[i * 3 + i] = 1.0;
  const std::vector<double> zero_bias(3, 0.0);
  CHECK(conv_forward(op, X, {2, 3, 3, identity.data(), zero_bias.data()}) == X);

  const Eigen::MatrixXd x1 = X.col(0);
  const std::vector<double> scaled = {2.5, 0.0, 0.0};
  const double bias = -0.75;
  const Eigen::MatrixXd y1 = conv_forward(op, x1, {3, 1, 1, scaled.data(), &bias});
  CHECK(testing::rel_err(y1, (2.5 * x1.array() - 0.75).matrix()) < 1e-15);

  const std::vector<double> theta = random_theta(5, 1, 1, 2);
  const Eigen::MatrixXd y = conv_forward(op, x1, {5, 1, 1, theta.data(), nullptr});
  CHECK(testing::rel_err(y, filter_apply(op, x1.col(0), {PolyFamily::laguerre, theta})) < 1e-14);

  // Multi-channel output columns are sums of single-channel filters.
  const std::vector<double> multi = random_theta(4, 3, 2, 3);
  const Eigen::MatrixXd Y = conv_forward(op, X, {4, 3, 2, multi.data(), nullptr});
  for (int o = 0; o < 2; ++o) {
    Eigen::VectorXd want = Eigen::VectorXd::Zero(60);
    for (int i = 0; i < 3; ++i) {
      std::vector<double> t(4);
      for (int k = 0; k < 4; ++k) t[k] = multi[k * 6 + o * 3 + i];
      want += filter_apply(op, X.col(i), {PolyFamily::laguerre, t});
    }
    CHECK(testing::rel_err(Y.col(o), want) < 1e-13);
  }

  CHECK_THROWS_AS(conv_forward(op, X, {2, 2, 3, identity.data(), nullptr}), InputError);
  CHECK_THROWS_AS(conv_forward(op, Eigen::MatrixXd::Ones(10, 3), {2, 3, 3, identity.data(), nullptr}), InputError);
}

TEST_CASE("conv_backward examples") {
  const NormalizedOperator op = small_operator(PolyFamily::chebyshev);
  const Eigen::MatrixXd X = testing::random_matrix(60, 2, 4);
  const std::vector<double> theta = random_theta(3, 2, 3, 5);
  const std::vector<double> bias = {0.1, -0.2, 0.3};
  ConvCache cache;
  conv_forward(op, X, {3, 2, 3, theta.data(), bias.data()}, &cache);

  const ConvGrads zero = conv_backward(cache, Eigen::MatrixXd::Zero(60, 3));
  CHECK(zero.dX.isZero(0.0));
  CHECK(zero.dBias.isZero(0.0));
  for (const auto& d : zero.dTheta) CHECK(d.isZero(0.0));

  std::vector<double> identity(3 * 2 * 2, 0.0);
  identity[0] = identity[3] = 1.0;
  ConvCache id_cache;
  conv_forward(op, X, {3, 2, 2, identity.data(), nullptr}, &id_cache);
  const Eigen::MatrixXd dY2 = testing::random_matrix(60, 2, 6);
  CHECK(conv_backward(id_cache, dY2).dX == dY2);

  CHECK_THROWS_AS(conv_backward(ConvCache{}, dY2), InputError);
  CHECK_THROWS_AS(conv_backward(cache, dY2), InputError);

  // Central differences of <conv(X), R> for every input, coefficient and bias.
  const Eigen::MatrixXd R = testing::random_matrix(60, 3, 7);
  const ConvGrads g = conv_backward(cache, R);
  std::vector<double> th = theta, b = bias;
  Eigen::MatrixXd Xv = X;
  auto objective = [&] { return (conv_forward(op, Xv, {3, 2, 3, th.data(), b.data()}).array() * R.array()).sum(); };
  const double h = 1e-5;
  auto central = [&](double& x) {
    const double saved = x;
    x = saved + h;
    const double up = objective();
    x = saved - h;
    const double down = objective();
    x = saved;
    return (up - down) / (2 * h);
  };
  auto rel = [](double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-300}); };
  double worst = 0.0;
  for (Eigen::Index v = 0; v < 60; ++v)
    for (int i = 0; i < 2; ++i) worst = std::max(worst, rel(g.dX(v, i), central(Xv(v, i))));
  for (int k = 0; k < 3; ++k)
    for (int o = 0; o < 3; ++o)
      for (int i = 0; i < 2; ++i) worst = std::max(worst, rel(g.dTheta[k](i, o), central(th[k * 6 + o * 2 + i])));
  for (int o = 0; o < 3; ++o) worst = std::max(worst, rel(g.dBias[o], central(b[o])));
  CHECK(worst < 1e-5);
}

TEST_CASE("relu, softmax and cross-entropy") {
  CHECK(relu(Eigen::RowVector3d(-1, 0, 2)) == Eigen::MatrixXd(Eigen::RowVector3d(0, 0, 2)));
  const Eigen::MatrixXd neg = -Eigen::MatrixXd::Ones(2, 3);
  CHECK(relu(neg).isZero(0.0));
  CHECK(relu_backward(neg, Eigen::MatrixXd::Ones(2, 3)).isZero(0.0));
  CHECK(relu_backward(Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Constant(1, 1, 5.0))(0, 0) == 0.0);

  const Eigen::VectorXd p = softmax(Eigen::Vector2d(0.7, 0.7));
  CHECK(p == Eigen::VectorXd(Eigen::Vector2d(0.5, 0.5)));
  CHECK(cross_entropy(p, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(cross_entropy(softmax(Eigen::Vector2d(0.0, 800.0)), 1) < 1e-300);
  CHECK(std::isfinite(cross_entropy(softmax(Eigen::Vector2d(0.0, 800.0)), 0)));
  CHECK_THROWS_AS(cross_entropy(p, 2), InputError);
  CHECK_THROWS_AS(cross_entropy(p, -1), InputError);
}

TEST_CASE("l2 penalty covers the FC weights only by default") {
  Model m = tiny_model(PolyFamily::hermite, OperatorKind::laplace_beltrami, 1);
  const ParamLayout& L = m.layout();
  m.params().segment(L.w1, L.features * L.hidden).setZero();
  m.params().segment(L.w2, static_cast<Eigen::Index>(L.hidden) * L.classes).setZero();
  CHECK(m.l2_penalty(5e-4) == 0.0);
  m.params()[L.w2] = 2.0;
  m.params()[L.b2] = 9.0;
  CHECK(m.l2_penalty(0.5) == 2.0);
}

TEST_CASE("end-to-end gradient matches finite differences") {
  for (OperatorKind kind : {OperatorKind::laplace_beltrami, OperatorKind::graph_laplacian}) {
    for (PolyFamily family : kAllFamilies) {
      const Model m = tiny_model(family, kind, 11, 8);
      const LabeledSignals data = random_signals(60, 4, 12);
      const testing::GradCheck r = testing::check_gradient(m, data, {0, 1, 2, 3}, 5e-4);
      CAPTURE(to_string(family));
      CAPTURE(r.worst);
      CHECK(r.checked == m.layout().total);
      CHECK(r.loss_rel < 1e-13);
      CHECK(r.max_rel < 1e-5);
    }
  }
}

TEST_CASE("gradient with l2 on conv and pooling over fakes as zeros") {
  const LBOperator op = assemble_laplace_beltrami(generate_torus(6, 10));
  NetworkSpec spec;
  spec.layers = {{3, 4, 2}, {4, 2, 1}};
  spec.hidden = 8;
  spec.l2_on_conv = true;
  spec.pool_mode = PoolMode::fakes_as_zero;
  spec.conv_bias = false;
  Model m(spec, build_hierarchy(op, 3), PolyFamily::chebyshev, 5);
  CHECK(m.layout().conv[0].bias == -1);
  const LabeledSignals data = random_signals(60, 3, 2);
  const testing::GradCheck r = testing::check_gradient(m, data, {0, 1, 2}, 1e-2);
  CHECK(r.loss_rel < 1e-13);
  CHECK(r.max_rel < 1e-5);
}

TEST_CASE("learning rate schedules and sgd") {
  TrainConfig c;
  CHECK(learning_rate(c, 0) == c.lr0);
  CHECK(learning_rate(c, 19) == c.lr0);
  CHECK(learning_rate(c, 20) == doctest::Approx(0.05 * c.lr0).epsilon(1e-15));
  c.schedule = LrSchedule::subtractive;
  c.lr0 = 0.1;
  CHECK(learning_rate(c, 25) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(learning_rate(c, 45) == 0.0);
  c.schedule = LrSchedule::constant;
  CHECK(learning_rate(c, 100) == 0.1);
  CHECK(parse_lr_schedule(to_string(LrSchedule::subtractive)) == LrSchedule::subtractive);
  CHECK_THROWS_AS(parse_lr_schedule("cosine"), InputError);

  TrainConfig plain;
  plain.momentum = 0.0;
  plain.lr0 = 1.0;
  Eigen::VectorXd p = Eigen::VectorXd::Constant(1, 3.25), v;
  sgd_step(p, p, v, plain, 0);
  CHECK(p[0] == 0.0);

  TrainConfig mom;
  mom.lr0 = 0.01;
  Eigen::VectorXd q = Eigen::VectorXd::Zero(2), vel = Eigen::VectorXd::Zero(2);
  const Eigen::VectorXd g(Eigen::Vector2d(1.5, -2.0));
  sgd_step(q, g, vel, mom, 0);
  sgd_step(q, g, vel, mom, 1);
  CHECK(testing::rel_err(q, -0.01 * g * (1 + 1.9)) < 1e-15);
  CHECK_THROWS_AS(sgd_step(q, Eigen::VectorXd::Ones(3), vel, mom, 0), InputError);
}

TEST_CASE("metrics") {
  const Metrics perfect = metrics_from_confusion(50, 50, 0, 0);
  CHECK(perfect.accuracy == 100.0);
  CHECK(perfect.sensitivity == 100.0);
  CHECK(perfect.specificity == 100.0);
  CHECK(perfect.gmean == 100.0);

  // Always predicting class 0 on 60 negatives and 40 positives.
  const Metrics zero = metrics_from_confusion(0, 60, 0, 40);
  CHECK(zero.accuracy == 60.0);
  CHECK(zero.sensitivity == 0.0);
  CHECK(zero.gmean == 0.0);

  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> count(0, 100);
  for (int t = 0; t < 200; ++t) {
    const std::size_t tp = count(rng), tn = count(rng), fp = count(rng), fn = count(rng);
    const Metrics m = metrics_from_confusion(tp, tn, fp, fn);
    if (m.total == 0) continue;
    CHECK(m.accuracy == doctest::Approx(100.0 * (tp + tn) / m.total).epsilon(1e-14));
    CHECK(m.gmean * m.gmean == doctest::Approx(m.sensitivity * m.specificity).epsilon(1e-12));
    for (double x : {m.accuracy, m.sensitivity, m.specificity, m.gmean}) CHECK((x >= 0.0 && x <= 100.0));
  }
}

TEST_CASE("evaluate counts against the declared positive class") {
  Model m = tiny_model(PolyFamily::laguerre, OperatorKind::graph_laplacian, 3);
  const LabeledSignals data = random_signals(60, 10, 4);
  const Metrics as1 = evaluate(m, data, 1);
  const Metrics as0 = evaluate(m, data, 0);
  CHECK(as1.total == 10);
  CHECK(as1.tp == as0.tn);
  CHECK(as1.fp == as0.fn);
  CHECK(as1.accuracy == as0.accuracy);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) correct += m.predict(data.sample(i)) == data.labels[i];
  CHECK(as1.accuracy == 100.0 * correct / 10.0);
}

TEST_CASE("model validation") {
  const LBOperator op = assemble_laplace_beltrami(generate_torus(6, 10));
  NetworkSpec spec;
  spec.layers = {{4, 3, 2}, {4, 3, 2}};
  CHECK_THROWS_AS(Model(spec, build_hierarchy(op, 3), PolyFamily::chebyshev, 1), InputError);
  spec.layers = {};
  CHECK_THROWS_AS(Model(spec, build_hierarchy(op, 3), PolyFamily::chebyshev, 1), InputError);
  spec.layers = {{0, 3, 1}};
  CHECK_THROWS_AS(Model(spec, build_hierarchy(op, 3), PolyFamily::chebyshev, 1), InputError);
  Model ok = tiny_model(PolyFamily::chebyshev, OperatorKind::laplace_beltrami, 1);
  CHECK_THROWS_AS(ok.predict(Eigen::VectorXd::Ones(59)), InputError);
}

TEST_CASE("parameter layout and initialization") {
  Model a = tiny_model(PolyFamily::chebyshev, OperatorKind::laplace_beltrami, 42);
  const ParamLayout& L = a.layout();
  REQUIRE(L.conv.size() == 2);
  CHECK(L.conv[0].in == 1);
  CHECK(L.conv[1].in == 4);
  CHECK(L.conv[1].level == 1);
  CHECK(L.top_level == 2);
  CHECK(L.features == a.hierarchy().levels[2].padded_size() * 4);
  CHECK(L.total == 3 * 4 + 4 + 3 * 16 + 4 + L.features * 16 + 16 + 16 * 2 + 2);
  CHECK(a.params().size() == L.total);
  // Biases start at zero; weights within 1/sqrt(fan_in).
  CHECK(a.params().segment(L.b1, 16).isZero(0.0));
  CHECK(a.params().segment(L.conv[0].bias, 4).isZero(0.0));
  CHECK(a.params().segment(L.conv[1].theta, 48).cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(12.0));
  CHECK(a.params().segment(L.w1, L.features * 16).cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(double(L.features)));

  Model b = tiny_model(PolyFamily::chebyshev, OperatorKind::laplace_beltrami, 42);
  Model c = tiny_model(PolyFamily::chebyshev, OperatorKind::laplace_beltrami, 43);
  CHECK(a.params() == b.params());
  CHECK(a.params() != c.params());
}

TEST_CASE("conv layers are permutation equivariant") {
  const TriMesh mesh = generate_torus(6, 10);
  std::vector<int> perm(mesh.num_vertices());  // old -> new
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(9));
  std::vector<Vec3> verts(mesh.num_vertices());
  for (std::size_t v = 0; v < verts.size(); ++v) verts[perm[v]] = mesh.vertices()[v];
  std::vector<Face> faces;
  for (const Face& f : mesh.faces()) faces.push_back({perm[f[0]], perm[f[1]], perm[f[2]]});
  const TriMesh permuted(verts, faces);

  for (OperatorKind kind : {OperatorKind::laplace_beltrami, OperatorKind::graph_laplacian}) {
    LBOperator a = assemble_operator(mesh, kind), b = assemble_operator(permuted, kind);
    a = testing::with_lambda(a);
    b.lambda_max = a.lambda_max;
    for (PolyFamily family : kAllFamilies) {
      const NormalizedOperator na = normalize(a, family), nb = normalize(b, family);
      const Eigen::MatrixXd X = testing::random_matrix(60, 2, 10);
      Eigen::MatrixXd Xp(60, 2);
      for (int v = 0; v < 60; ++v) Xp.row(perm[v]) = X.row(v);
      const std::vector<double> theta = random_theta(5, 2, 3, 11);
      const std::vector<double> bias = {0.5, -0.5, 1.0};
      const Eigen::MatrixXd Y = conv_forward(na, X, {5, 2, 3, theta.data(), bias.data()});
      const Eigen::MatrixXd Yp = conv_forward(nb, Xp, {5, 2, 3, theta.data(), bias.data()});
      Eigen::MatrixXd back(60, 3);
      for (int v = 0; v < 60; ++v) back.row(v) = Yp.row(perm[v]);
      CHECK(testing::rel_err(back, Y) < 1e-12);
    }
  }
}

TEST_CASE("training is deterministic and reduces the loss") {
  const TriMesh mesh = generate_icosphere(2);
  BumpParams bp;
  bp.n_per_class = 40;
  bp.noise_sigma = 0.1;
  const LabeledSignals data = generate_bump_dataset(mesh, bp, 3);
  const Splits s = split_grouped(data, {0.6, 0.2, 0.2}, 4);

  auto make = [&] {
    NetworkSpec spec;
    spec.layers = {{4, 3, 2}, {8, 3, 2}};
    spec.hidden = 32;
    return Model(spec, build_hierarchy(assemble_laplace_beltrami(mesh), 4), PolyFamily::laguerre, 7);
  };
  TrainConfig cfg;
  cfg.lr0 = 0.01;
  cfg.batch_size = 8;
  cfg.seed = 5;

  Model a = make();
  const double initial = dataset_loss(a, s.train);
  const auto hist = train(a, s.train, s.val, cfg, Exec::serial);
  REQUIRE(hist.size() == 30);
  CHECK(dataset_loss(a, s.train) < 0.1 * initial);
  CHECK(hist.back().val_acc == evaluate(a, s.val).accuracy);
  CHECK(hist[0].lr == cfg.lr0);
  CHECK(hist[20].lr == doctest::Approx(0.05 * cfg.lr0));

  Model b = make();
  const auto hist_b = train(b, s.train, s.val, cfg, Exec::serial);
  CHECK(a.params() == b.params());
  CHECK(hist_b.back().val_loss == hist.back().val_loss);

  Model c = make();
  train(c, s.train, s.val, cfg, Exec::parallel);
  CHECK(a.params() == c.params());
}

TEST_CASE("training rejects unusable splits") {
  Model m = tiny_model(PolyFamily::chebyshev, OperatorKind::laplace_beltrami, 1);
  LabeledSignals data = random_signals(60, 6, 1);
  TrainConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_AS(train(m, LabeledSignals{}, data, cfg), InputError);
  CHECK_THROWS_AS(train(m, data, LabeledSignals{}, cfg), InputError);
  LabeledSignals one_class = data;
  std::fill(one_class.labels.begin(), one_class.labels.end(), 0);
  CHECK_THROWS_AS(train(m, one_class, data, cfg), InputError);
  LabeledSignals bad_label = data;
  bad_label.labels[0] = 5;
  CHECK_THROWS_AS(m.loss_and_gradient(bad_label, {0}, 0.0, nullptr), InputError);
}

TEST_CASE("parameter files round-trip") {
  const auto dir = std::filesystem::temp_directory_path() / "lbcnn_params_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "p.bin").string();
  Eigen::VectorXd p = testing::random_matrix(37, 1, 3).col(0);
  p[3] = -0.0;
  p[4] = 1e-310;
  write_params(path, p);
  CHECK(std::filesystem::file_size(path) == 37 * 8);
  const Eigen::VectorXd back = read_params(path, 37);
  for (int i = 0; i < 37; ++i) CHECK(std::bit_cast<std::uint64_t>(back[i]) == std::bit_cast<std::uint64_t>(p[i]));
  CHECK_THROWS_AS(read_params(path, 38), InputError);
  CHECK_THROWS_AS(read_params(path, 36), InputError);
  CHECK_THROWS_AS(read_params((dir / "missing.bin").string(), 1), InputError);
  std::filesystem::remove_all(dir);
}
