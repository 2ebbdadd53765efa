// SPDX-License-Identifier: Apache-2.0
// Exercises the shared library through its C header only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <energy_ood/energy_ood.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

namespace {

std::string take(char* s) {
  std::string out(s);
  eood_free(s);
  return out;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("eood_capi_" + name)).string();
}

}  // namespace

TEST_CASE("version, status names and last error") {
  CHECK(std::string(eood_version()) == "0.1.0");
  CHECK(std::string(eood_status_name(EOOD_ERR_PARSE)) == "parse error");
  double out = 0.0;
  CHECK(eood_energy_score(nullptr, 3, 1.0, &out) == EOOD_ERR_INVALID_ARGUMENT);
  CHECK(std::strlen(eood_last_error()) > 0);
  const double logits[] = {1, 2, 3};
  CHECK(eood_energy_score(logits, 3, 0.0, &out) == EOOD_ERR_INVALID_ARGUMENT);
  CHECK(std::string(eood_last_error()).find("temperature") != std::string::npos);
  CHECK(eood_label_energy(logits, 3, 3, &out) == EOOD_ERR_OUT_OF_RANGE);

  eood_score_kind k;
  CHECK(eood_score_kind_parse("msp", &k) == EOOD_OK);
  CHECK(k == EOOD_SCORE_MSP);
  CHECK(std::string(eood_score_kind_name(EOOD_SCORE_NEG_ENERGY_GDA)) == "neg_energy_gda");
  CHECK(eood_score_kind_parse("bogus", &k) != EOOD_OK);
}

TEST_CASE("scores") {
  const double logits[] = {1, 2, 3};
  double e = 0.0, msp = 0.0, neg = 0.0;
  REQUIRE(eood_energy_score(logits, 3, 1.0, &e) == EOOD_OK);
  CHECK(std::abs(e - -3.4076059644443803) < 1e-14);
  REQUIRE(eood_neg_energy_score(logits, 3, 1.0, &neg) == EOOD_OK);
  CHECK(neg == -e);
  REQUIRE(eood_msp_score(logits, 3, &msp) == EOOD_OK);
  CHECK(std::abs(msp - 0.66524095577482189) < 1e-15);
  double probs[3];
  REQUIRE(eood_softmax(logits, 3, 1.0, probs) == EOOD_OK);
  CHECK(probs[2] == msp);

  const double rows[] = {1, 2, 3, 1000, 1000, 1000};
  double s[2];
  REQUIRE(eood_score_logits(rows, 2, 3, EOOD_SCORE_NEG_ENERGY, 1.0, s) == EOOD_OK);
  CHECK(s[0] == neg);
  CHECK(std::abs(s[1] - (1000 + std::log(3.0))) < 1e-9);
  CHECK(eood_score_logits(rows, 2, 3, EOOD_SCORE_MAHALANOBIS, 1.0, s) != EOOD_OK);
}

TEST_CASE("detector and metrics") {
  std::vector<double> in;
  for (int i = 1; i <= 20; ++i) in.push_back(i);
  eood_detector det;
  REQUIRE(eood_calibrate(in.data(), in.size(), 0.95, EOOD_SCORE_NEG_ENERGY, &det) == EOOD_OK);
  CHECK(det.tau == 1.0);
  double rate = 0.0;
  REQUIRE(eood_pass_rate(in.data(), in.size(), det.tau, &rate) == EOOD_OK);
  CHECK(rate == 0.95);
  int label = -1;
  REQUIRE(eood_classify(1.0, &det, &label) == EOOD_OK);
  CHECK(label == 0);

  REQUIRE(eood_calibrate(in.data(), 4, 0.95, EOOD_SCORE_NEG_ENERGY, &det) == EOOD_OK);
  CHECK(std::isinf(det.tau));
  char* text = nullptr;
  REQUIRE(eood_detector_to_json(&det, &text) == EOOD_OK);
  const std::string json = take(text);
  CHECK(json.find("\"-inf\"") != std::string::npos);
  eood_detector back;
  REQUIRE(eood_detector_from_json(json.c_str(), &back) == EOOD_OK);
  CHECK(std::isinf(back.tau));
  CHECK(eood_detector_from_json("{", &back) == EOOD_ERR_PARSE);

  const double zeros[] = {0, 0, 0};
  eood_detector high{10.0, 0.95, EOOD_SCORE_NEG_ENERGY};
  std::int64_t pred = 0;
  REQUIRE(eood_filter_and_predict(zeros, 3, &high, 1.0, &pred) == EOOD_OK);
  CHECK(pred == -1);

  const double a[] = {4, 5, 6}, b[] = {1, 2, 3};
  eood_report rep;
  REQUIRE(eood_full_report(a, 3, b, 3, 0.95, 1, &rep) == EOOD_OK);
  CHECK(rep.auroc == 1.0);
  CHECK(rep.has_aupr_out == 1);
  REQUIRE(eood_report_to_json(&rep, &text) == EOOD_OK);
  CHECK(take(text).find("aupr_out") != std::string::npos);
  double v = 0.0;
  CHECK(eood_auroc(a, 0, b, 3, &v) == EOOD_ERR_INVALID_ARGUMENT);
}

TEST_CASE("score files and tables") {
  const std::string path = temp_path("scores.csv");
  const double s[] = {0.5, -1.25, 3.0};
  REQUIRE(eood_scores_save(path.c_str(), s, 3) == EOOD_OK);
  double* loaded = nullptr;
  std::size_t n = 0;
  REQUIRE(eood_scores_load(path.c_str(), nullptr, &loaded, &n) == EOOD_OK);
  REQUIRE(n == 3);
  CHECK(loaded[1] == -1.25);
  eood_free(loaded);
  CHECK(eood_scores_load(temp_path("missing.csv").c_str(), nullptr, &loaded, &n) == EOOD_ERR_IO);

  const double values[] = {1, 2, 3, 4, 5, 6};
  const std::int32_t labels[] = {0, EOOD_NO_LABEL, 1};
  const std::int32_t splits[] = {EOOD_SPLIT_IN, EOOD_SPLIT_OUT, EOOD_SPLIT_IN};
  eood_table* t = nullptr;
  REQUIRE(eood_table_create(3, 2, values, labels, splits, &t) == EOOD_OK);
  CHECK(eood_table_rows(t) == 3);
  CHECK(eood_table_split_rows(t, EOOD_SPLIT_IN) == 2);
  const std::string tpath = temp_path("table.bin");
  REQUIRE(eood_table_save(t, tpath.c_str(), EOOD_FORMAT_RAW64) == EOOD_OK);
  eood_table* u = nullptr;
  REQUIRE(eood_table_load(tpath.c_str(), EOOD_FORMAT_RAW64, &u) == EOOD_OK);
  double in_vals[4];
  std::int32_t in_labels[2];
  REQUIRE(eood_table_copy_split(u, EOOD_SPLIT_IN, in_vals, in_labels) == EOOD_OK);
  CHECK(in_vals[2] == 5.0);
  CHECK(in_labels[1] == 1);
  eood_table_destroy(t);
  eood_table_destroy(u);
  eood_table_destroy(nullptr);
  std::filesystem::remove(path);
  std::filesystem::remove(tpath);
  std::filesystem::remove(tpath + ".json");
}

TEST_CASE("benchmark, MLP and checkpoints") {
  eood_table* train = nullptr;
  eood_table* test = nullptr;
  char* manifest = nullptr;
  REQUIRE(eood_bench_generate(R"({"n_train_in": 64, "n_train_out": 64, "n_test_in": 8, "n_test_out": 8})", &train,
                              &test, &manifest) == EOOD_OK);
  CHECK(take(manifest).find("prng_name") != std::string::npos);
  const std::size_t n = eood_table_split_rows(train, EOOD_SPLIT_IN);
  std::vector<double> x(n * 2);
  std::vector<std::int32_t> y(n);
  REQUIRE(eood_table_copy_split(train, EOOD_SPLIT_IN, x.data(), y.data()) == EOOD_OK);
  std::vector<double> xo(eood_table_split_rows(train, EOOD_SPLIT_OUT) * 2);
  REQUIRE(eood_table_copy_split(train, EOOD_SPLIT_OUT, xo.data(), nullptr) == EOOD_OK);

  const std::size_t sizes[] = {2, 8, 2};
  eood_mlp* m = nullptr;
  REQUIRE(eood_mlp_create(sizes, 3, 5, &m) == EOOD_OK);
  CHECK(eood_mlp_num_params(m) == 2 * 8 + 8 + 8 * 2 + 2);
  eood_batch in{x.data(), y.data(), n, 2};
  eood_batch out{xo.data(), nullptr, xo.size() / 2, 2};
  eood_train_config cfg;
  eood_train_config_default(&cfg);
  CHECK(cfg.lambda == 0.1);
  CHECK(cfg.m_in == -23.0);
  REQUIRE(eood_train_config_from_json(R"({"lr0": 0.05, "epochs": 2, "m_in": -3, "m_out": -1})", &cfg) == EOOD_OK);
  CHECK(cfg.lr0 == 0.05);
  CHECK(cfg.batch_in == 128);

  double loss = 0.0;
  std::vector<double> grad(eood_mlp_num_params(m));
  REQUIRE(eood_mlp_loss(m, EOOD_LOSS_TOTAL, &in, &out, &cfg, &loss, grad.data(), grad.size()) == EOOD_OK);
  CHECK(std::isfinite(loss));
  CHECK(eood_mlp_loss(m, EOOD_LOSS_TOTAL, &in, &out, &cfg, &loss, grad.data(), 3) == EOOD_ERR_INVALID_ARGUMENT);

  struct Count {
    int rows = 0;
  } count;
  const auto cb = [](const eood_train_log_row*, void* user) { ++static_cast<Count*>(user)->rows; };
  eood_mlp* copy = nullptr;
  REQUIRE(eood_mlp_clone(m, &copy) == EOOD_OK);
  REQUIRE(eood_mlp_finetune(m, &in, &out, &cfg, cb, &count) == EOOD_OK);
  CHECK(count.rows == 2);  // 2 epochs of one 64-row batch
  REQUIRE(eood_mlp_finetune(copy, &in, &out, &cfg, nullptr, nullptr) == EOOD_OK);
  std::vector<double> p1(eood_mlp_num_params(m)), p2(p1.size());
  eood_mlp_get_params(m, p1.data(), p1.size());
  eood_mlp_get_params(copy, p2.data(), p2.size());
  CHECK(p1 == p2);

  double m_in = 0.0, m_out = 0.0;
  REQUIRE(eood_mlp_auto_margins(m, &in, &out, &m_in, &m_out) == EOOD_OK);
  CHECK(m_in <= m_out);

  const std::string ck = temp_path("model.ckpt");
  REQUIRE(eood_mlp_save(m, ck.c_str(), &cfg) == EOOD_OK);
  eood_mlp* loaded = nullptr;
  eood_train_config back;
  int has_cfg = 0;
  REQUIRE(eood_mlp_load(ck.c_str(), &loaded, &back, &has_cfg) == EOOD_OK);
  CHECK(has_cfg == 1);
  CHECK(back.lr0 == 0.05);
  std::vector<double> p3(p1.size());
  eood_mlp_get_params(loaded, p3.data(), p3.size());
  CHECK(p3 == p1);

  std::vector<double> scores(eood_table_split_rows(test, EOOD_SPLIT_OUT));
  REQUIRE(eood_mlp_score_split(loaded, test, EOOD_SPLIT_OUT, EOOD_SCORE_MSP, 1.0, scores.data()) == EOOD_OK);
  for (double s : scores) CHECK((s >= 0.5 && s <= 1.0));

  cfg.lr0 = 1e200;
  CHECK(eood_mlp_finetune(m, &in, &out, &cfg, nullptr, nullptr) == EOOD_ERR_NUMERICAL);

  eood_mlp_destroy(m);
  eood_mlp_destroy(copy);
  eood_mlp_destroy(loaded);
  eood_table_destroy(train);
  eood_table_destroy(test);
  std::filesystem::remove(ck);
}

TEST_CASE("GDA") {
  const double means[] = {-1, 0, 1, 0};
  const double cov[] = {1, 0, 0, 1};
  const double priors[] = {0.5, 0.5};
  eood_gda* g = nullptr;
  REQUIRE(eood_gda_create(means, 2, 2, cov, priors, 0.0, &g) == EOOD_OK);
  const double mid[] = {0, 0};
  double p[2], e = 0.0, mah = 0.0;
  REQUIRE(eood_gda_posterior(g, mid, 2, p, 2) == EOOD_OK);
  CHECK(p[0] == 0.5);
  REQUIRE(eood_gda_energy_u(g, mid, 2, &e) == EOOD_OK);
  CHECK(std::abs(e - 0.30685281944005469) < 1e-12);
  REQUIRE(eood_gda_mahalanobis(g, means, 2, &mah) == EOOD_OK);
  CHECK(mah == 0.0);
  char* text = nullptr;
  REQUIRE(eood_gda_to_json(g, &text) == EOOD_OK);
  eood_gda* h = nullptr;
  REQUIRE(eood_gda_from_json(take(text).c_str(), &h) == EOOD_OK);
  CHECK(eood_gda_num_classes(h) == 2);

  const double pts[] = {0, 0, 0, 0, 1, 1};
  const std::int32_t labels[] = {0, 0, 1};
  eood_gda* bad = nullptr;
  CHECK(eood_gda_fit(pts, 3, 2, labels, 0.0, &bad) == EOOD_ERR_NUMERICAL);
  CHECK(bad == nullptr);
  eood_gda_destroy(g);
  eood_gda_destroy(h);
}
