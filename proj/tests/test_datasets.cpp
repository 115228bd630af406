#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "fedmoe/datasets.hpp"

using namespace fedmoe;

namespace {

struct TempCsv {
  std::filesystem::path path;
  TempCsv(const std::string& name, const std::string& body)
      : path(std::filesystem::temp_directory_path() / ("fedmoe_test_" + name + ".csv")) {
    std::ofstream(path) << body;
  }
  ~TempCsv() { std::filesystem::remove(path); }
  std::string str() const { return path.string(); }
};

std::string boc_body(int rows, bool fx_names = false) {
  std::ostringstream os;
  const std::string pre = fx_names ? "FX" : "";
  const std::string post = fx_names ? "CAD" : "";
  os << "date";
  for (const char* iso : {"USD", "AUD", "EUR", "GBP", "JPY", "CHF"}) os << ',' << pre << iso << post;
  os << '\n';
  for (int r = 0; r < rows; ++r) {
    os << "2017-01-" << r + 1;
    for (int c = 0; c < 6; ++c) os << ',' << 1.0 + 0.01 * r + 0.1 * c;
    os << '\n';
  }
  return os.str();
}

std::string ett_body(int rows, double scale = 1.0) {
  std::ostringstream os;
  os << "date,HUFL,HULL,MUFL,MULL,LUFL,LULL,OT\n";
  for (int r = 0; r < rows; ++r) {
    os << "2016-07-01 " << r << ":00";
    for (int c = 0; c < 7; ++c) os << ',' << scale * (c + 1) * (r + 1);
    os << '\n';
  }
  return os.str();
}

}  // namespace

TEST_CASE("periodic") {
  const Dataset d = gen_periodic();
  CHECK(d.size() == 200);
  double lo = 1, hi = -1;
  for (const auto& r : d.records) {
    lo = std::min(lo, r.y(0));
    hi = std::max(hi, r.y(0));
  }
  CHECK(lo == doctest::Approx(-0.9).epsilon(1e-12));
  CHECK(hi == doctest::Approx(0.9).epsilon(1e-12));
  for (std::size_t t = 1; t < d.size(); ++t) CHECK(d.records[t].x(0) == d.records[t - 1].y(0));
  CHECK_NOTHROW(d.validate());
}

TEST_CASE("logistic") {
  const Dataset d = gen_logistic();
  CHECK(d.size() == 200);
  CHECK((d.records[0].y(0) + 1.0) / 2.0 == doctest::Approx(0.40716).epsilon(1e-12));
  CHECK((d.records[0].x(0) + 1.0) / 2.0 == doctest::Approx(0.13).epsilon(1e-12));
  for (std::size_t t = 0; t < d.size(); ++t) {
    CHECK(std::abs(d.records[t].y(0)) < 1.0);
    if (t > 0) CHECK(d.records[t].x(0) == d.records[t - 1].y(0));
  }
  CHECK_THROWS_AS(gen_logistic(10, 4.5), DatasetError);
  CHECK_THROWS_AS(gen_logistic(10, 3.6, 1.0), DatasetError);
}

TEST_CASE("concept drift") {
  const Dataset d = gen_concept_drift();
  CHECK(d.d_x == 3);
  CHECK(d.d_y == 2);
  CHECK(d.records[0].y(0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(d.records.back().x(0) == doctest::Approx(2.0 * std::numbers::pi).epsilon(1e-14));
  CHECK(concept_drift_blend(7.0 * std::numbers::pi / 8.0) == 1.0);
  CHECK(concept_drift_blend(0.0) == 1.0);
  CHECK(concept_drift_blend(2.0 * std::numbers::pi) == 0.0);
  // Cosine transition as written: it reaches cos(pi/2) = 0 at 9 pi / 8.
  CHECK(std::abs(concept_drift_blend(9.0 * std::numbers::pi / 8.0)) < 1e-15);

  const double p = 2.0 * std::numbers::pi;
  const double x3 = std::sqrt(p);
  const double y12 = p + p - std::sin(x3);
  CHECK(d.records.back().y(0) == doctest::Approx(y12).epsilon(1e-12));

  const Dataset one = gen_concept_drift(200, true);
  CHECK(one.d_y == 1);
  for (std::size_t t = 0; t < one.size(); ++t) CHECK(one.records[t].y(0) == d.records[t].y(1));
}

TEST_CASE("brownian sum") {
  const Dataset d = gen_brownian_sum(50, 1.0, 1.0, 3, 11);
  CHECK(d.d_y == 3);
  CHECK(d.d_x == 4);
  for (const auto& r : d.records) {
    CHECK(r.y(0) - (r.x(0) + r.x(1)) == 0.0);
    CHECK(r.y(2) - (r.x(0) + r.x(3)) == 0.0);
  }
  const Dataset again = gen_brownian_sum(50, 1.0, 1.0, 3, 11);
  CHECK(again.records.back().y == d.records.back().y);

  double mean = 0.0;
  const int seeds = 1000;
  for (int s = 0; s < seeds; ++s) mean += gen_brownian_sum(11, 1.0, 1.0, 1, static_cast<std::uint64_t>(s)).records[10].x(1);
  mean /= seeds;
  // Var of b_10 is 10, so the standard error is 0.1.
  CHECK(std::abs(mean - 10.0) < 0.4);
}

TEST_CASE("normalization is idempotent") {
  const Dataset d = normalize_by_max(gen_brownian_sum(60, 0.5, 1.0, 2, 3));
  const Dataset twice = normalize_by_max(d);
  for (std::size_t t = 0; t < d.size(); ++t) {
    CHECK((d.records[t].x - twice.records[t].x).cwiseAbs().maxCoeff() == 0.0);
    CHECK((d.records[t].y - twice.records[t].y).cwiseAbs().maxCoeff() == 0.0);
    CHECK(d.records[t].y.cwiseAbs().maxCoeff() <= 1.0);
  }
}

TEST_CASE("prefix") {
  const Dataset d = gen_periodic(50);
  const Dataset p = d.prefix(20);
  CHECK(p.size() == 20);
  CHECK(p.records[19].y == d.records[19].y);
}

TEST_CASE("bank of canada loader") {
  const TempCsv csv("boc", boc_body(30));
  const Dataset d = load_boc_csv(csv.str(), 20);
  CHECK(d.size() == 18);
  CHECK(d.d_x == 10);
  const CsvTable raw = read_csv(csv.str());
  const auto& usd = raw.column("USD");
  const auto& jpy = raw.column("JPY");
  for (std::size_t t = 0; t < d.size(); ++t) {
    CHECK(d.records[t].y(0) == usd[t + 2]);
    CHECK(d.records[t].x(0) == usd[t + 1]);
    CHECK(d.records[t].x(1) == usd[t]);
    CHECK(d.records[t].x(8) == jpy[t + 1]);
    CHECK(d.records[t].x(9) == jpy[t]);
  }
  const Dataset shifted = load_boc_csv(csv.str(), 10, 15);
  CHECK(shifted.records[0].y(0) == usd[17]);

  const TempCsv fx("boc_fx", boc_body(12, true));
  CHECK(load_boc_csv(fx.str(), 12).records[0].y(0) == read_csv(fx.str()).column("FXUSDCAD")[2]);

  CHECK_THROWS_WITH_AS(load_boc_csv(csv.str(), 40), doctest::Contains("short file"), DatasetError);
  const TempCsv missing("boc_missing", "date,USD,AUD\n2017-01-01,1,2\n");
  CHECK_THROWS_WITH_AS(load_boc_csv(missing.str(), 1), doctest::Contains("missing column"), DatasetError);
  const TempCsv bad("boc_bad", "date,USD,AUD,EUR,GBP,JPY\n2017-01-01,1,2,x,4,5\n");
  CHECK_THROWS_WITH_AS(load_boc_csv(bad.str(), 1), doctest::Contains("non-numeric cell"), DatasetError);
}

TEST_CASE("ETT loader") {
  const TempCsv csv("ett", ett_body(40));
  const Dataset d = load_ett_csv(csv.str(), 30);
  CHECK(d.size() == 27);
  CHECK(d.d_x == 20);
  CHECK(d.records[0].t == 0);
  double top = 0.0;
  for (const auto& r : d.records) top = std::max(top, std::abs(r.y(0)));
  CHECK(top <= 1.0);
  // OT column is 7 (r + 1), normalized by its max over the 30-row slice.
  CHECK(d.records[0].y(0) == doctest::Approx(4.0 / 30.0).epsilon(1e-14));
  CHECK(d.records[0].x(0) == doctest::Approx(3.0 / 30.0).epsilon(1e-14));
  CHECK(d.records[0].x(2) == doctest::Approx(3.0 / 30.0).epsilon(1e-14));
  CHECK(d.records[0].x(4) == doctest::Approx(1.0 / 30.0).epsilon(1e-14));
  CHECK(d.scales.at("OT") == 7.0 * 30.0);

  const Dataset raw = load_ett_csv(csv.str(), 30, false);
  CHECK(raw.records[0].y(0) == 28.0);
  const Dataset reused = load_ett_csv(csv.str(), 10, true, 20, d.scales);
  CHECK(reused.records[0].y(0) == doctest::Approx(7.0 * 24.0 / (7.0 * 30.0)).epsilon(1e-14));

  const TempCsv schema("ett_schema", "date,HUFL,OT\n2016-07-01,1,2\n");
  CHECK_THROWS_WITH_AS(load_ett_csv(schema.str(), 1), doctest::Contains("schema mismatch"), DatasetError);
  const TempCsv zero("ett_zero", ett_body(10, 0.0));
  CHECK_THROWS_WITH_AS(load_ett_csv(zero.str(), 10), doctest::Contains("zero max"), DatasetError);
}

TEST_CASE("strict csv reader") {
  const TempCsv ragged("ragged", "date,a,b\n2020-01-01,1\n");
  CHECK_THROWS_AS(read_csv(ragged.str()), DatasetError);
  const TempCsv trailing("trailing", "date,a\n2020-01-01,1.5x\n");
  CHECK_THROWS_WITH_AS(read_csv(trailing.str()), doctest::Contains("non-numeric cell"), DatasetError);
  CHECK_THROWS_AS(read_csv("/nonexistent/file.csv"), DatasetError);
}

TEST_CASE("make_dataset dispatch") {
  DatasetSpec spec;
  spec.n = 30;
  CHECK(make_dataset(spec).size() == 30);
  spec.name = "concept_drift_1d";
  CHECK(make_dataset(spec).d_y == 1);
  spec.name = "boc";
  CHECK_THROWS_AS(make_dataset(spec), DatasetError);
  spec.name = "nope";
  CHECK_THROWS_AS(make_dataset(spec), DatasetError);
}
