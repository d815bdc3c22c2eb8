#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "boba/datagen.hpp"
#include "test_util.hpp"

using boba::ClientPartition;
using boba::ErrorCode;
using boba::LabeledDataset;
using boba::Matrix;
using boba::Vector;

namespace {

LabeledDataset mixture(int c, int per_class, std::uint64_t seed, int dim = 4) {
  boba::Rng rng(seed);
  return boba::make_gaussian_mixture_task(c, std::max(dim, c), per_class, 2.0, rng);
}

// Every source row is used exactly once and each client matches its rows.
void check_partition_invariants(const LabeledDataset& data, const ClientPartition& p) {
  std::vector<int> all;
  for (size_t i = 0; i < p.clients.size(); ++i) {
    const auto& rows = p.rows[i];
    REQUIRE(p.clients[i].size() == static_cast<int>(rows.size()));
    for (size_t k = 0; k < rows.size(); ++k) {
      CHECK(p.clients[i].labels[k] == data.labels[static_cast<size_t>(rows[k])]);
      CHECK(p.clients[i].features.row(static_cast<Eigen::Index>(k)) == data.features.row(rows[k]));
    }
    CHECK((p.label_distributions[i] - boba::label_histogram(p.clients[i])).norm() < 1e-15);
    all.insert(all.end(), rows.begin(), rows.end());
  }
  std::sort(all.begin(), all.end());
  CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
  CHECK(static_cast<int>(all.size()) <= data.size());
}

int classes_present(const LabeledDataset& d) {
  return static_cast<int>(std::set<int>(d.labels.begin(), d.labels.end()).size());
}

}  // namespace

TEST_SUITE("datagen") {
  TEST_CASE("class means form a centred regular simplex") {
    for (int c : {2, 3, 5, 10}) {
      const auto task = boba::make_gaussian_mixture(c, c + 2, 3.0);
      CHECK(task.class_means.rowwise().sum().norm() < 1e-12);
      for (int a = 0; a < c; ++a) {
        for (int b = a + 1; b < c; ++b) {
          CHECK((task.class_means.col(a) - task.class_means.col(b)).norm() ==
                doctest::Approx(3.0 * std::sqrt(2.0)).epsilon(1e-12));
        }
      }
      CHECK(task.class_means.bottomRows(3).norm() == 0.0);
    }
    CHECK_ERROR_CODE(boba::make_gaussian_mixture(1, 3, 1.0), ErrorCode::kInvalidInput);
    CHECK_ERROR_CODE(boba::make_gaussian_mixture(5, 3, 1.0), ErrorCode::kInvalidInput);
  }

  TEST_CASE("class samples concentrate on their mean") {
    const auto task = boba::make_gaussian_mixture(3, 4, 2.0);
    boba::Rng rng(1);
    const auto d = task.sample_class(1, 20000, rng);
    CHECK(std::all_of(d.labels.begin(), d.labels.end(), [](int y) { return y == 1; }));
    const Vector mean = d.features.colwise().mean().transpose();
    CHECK((mean - task.class_means.col(1)).norm() < 0.05);
    const auto all = task.sample(10, rng);
    CHECK(all.size() == 30);
    CHECK((boba::label_histogram(all) - Vector::Constant(3, 1.0 / 3.0)).norm() < 1e-15);
  }

  TEST_CASE("mixture sampling follows the label distribution") {
    const auto task = boba::make_gaussian_mixture(3, 3, 1.0);
    boba::Rng rng(2);
    Vector p(3);
    p << 0.6, 0.0, 0.4;
    const auto d = task.sample_mixture(p, 20000, rng);
    CHECK((boba::label_histogram(d) - p).cwiseAbs().maxCoeff() < 0.02);
    CHECK(boba::label_histogram(d)(1) == 0.0);
  }

  TEST_CASE("label distribution validation") {
    CHECK_NOTHROW(boba::validate_label_distribution(Vector::Constant(4, 0.25)));
    Vector neg(2);
    neg << 1.5, -0.5;
    CHECK_ERROR_CODE(boba::validate_label_distribution(neg), ErrorCode::kInvalidInput);
    CHECK_ERROR_CODE(boba::validate_label_distribution(Vector::Constant(2, 0.4)), ErrorCode::kInvalidInput);
  }

  TEST_CASE("proportional counts") {
    CHECK(boba::proportional_counts(10, {1.0, 1.0, 1.0}) == std::vector<int>{4, 3, 3});
    CHECK(boba::proportional_counts(7, {0.0, 0.0}) == std::vector<int>{4, 3});
    CHECK(boba::proportional_counts(5, {3.0, 0.0, 1.0}) == std::vector<int>{4, 0, 1});
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> w(1 + trial % 7);
      for (auto& x : w) x = u(rng);
      const int total = trial * 3;
      const auto counts = boba::proportional_counts(total, w);
      const double sum = std::accumulate(w.begin(), w.end(), 0.0);
      int assigned = 0;
      for (size_t i = 0; i < w.size(); ++i) {
        const double exact = total * w[i] / sum;
        CHECK(counts[i] >= std::floor(exact) - 1e-9);
        CHECK(counts[i] <= std::ceil(exact) + 1e-9);
        assigned += counts[i];
      }
      CHECK(assigned == total);
    }
  }

  TEST_CASE("pathological partition uses every sample with at most s classes per client") {
    const auto data = mixture(10, 100, 4);
    for (int s : {1, 2, 3}) {
      boba::Rng rng(5);
      const auto p = boba::partition_pathological(data, 20, s, rng);
      REQUIRE(p.clients.size() == 20);
      check_partition_invariants(data, p);
      int total = 0;
      for (const auto& c : p.clients) {
        CHECK(classes_present(c) <= s);
        CHECK(!c.empty());
        total += c.size();
      }
      CHECK(total == data.size());
    }
    boba::Rng rng(6);
    CHECK_ERROR_CODE(boba::partition_pathological(data, 2, 2, rng), ErrorCode::kInvalidInput);
    CHECK_ERROR_CODE(boba::partition_pathological(data, 0, 2, rng), ErrorCode::kInvalidInput);
  }

  TEST_CASE("step partition: infinite alpha keeps two classes, alpha one is balanced") {
    const auto data = mixture(10, 200, 7);
    boba::Rng rng(8);
    const auto majors = boba::partition_step(data, 10, boba::kInfiniteAlpha, rng);
    check_partition_invariants(data, majors);
    for (const auto& c : majors.clients) CHECK(classes_present(c) == 2);

    const auto iid = boba::partition_step(data, 10, 1.0, rng);
    check_partition_invariants(data, iid);
    for (const auto& c : iid.clients) {
      CHECK(c.size() == 200);
      CHECK((boba::label_histogram(c) - Vector::Constant(10, 0.1)).cwiseAbs().maxCoeff() < 1e-15);
    }

    const auto skew = boba::partition_step(data, 10, 4.0, rng);
    for (const auto& p : skew.label_distributions) {
      Vector sorted = p;
      std::sort(sorted.data(), sorted.data() + sorted.size(), std::greater<>());
      CHECK(sorted(0) / sorted(2) == doctest::Approx(4.0).epsilon(0.15));
    }
    CHECK_ERROR_CODE(boba::partition_step(data, 10, 0.5, rng), ErrorCode::kInvalidInput);
  }

  TEST_CASE("Dirichlet partition assigns every sample and leaves no client empty") {
    const auto data = mixture(5, 200, 9);
    for (double alpha : {0.01, 0.5, 100.0}) {
      boba::Rng rng(10);
      const auto p = boba::partition_dirichlet(data, 20, alpha, rng);
      check_partition_invariants(data, p);
      int total = 0;
      for (const auto& c : p.clients) {
        CHECK_FALSE(c.empty());
        total += c.size();
      }
      CHECK(total == data.size());
    }
    boba::Rng rng(11);
    CHECK_ERROR_CODE(boba::partition_dirichlet(data, 20, 0.0, rng), ErrorCode::kInvalidInput);
  }

  TEST_CASE("larger Dirichlet alpha gives less skewed clients") {
    const auto data = mixture(5, 400, 12);
    auto mean_max_share = [&](double alpha) {
      boba::Rng rng(13);
      const auto p = boba::partition_dirichlet(data, 20, alpha, rng);
      double s = 0.0;
      for (const auto& d : p.label_distributions) s += d.maxCoeff() / 20.0;
      return s;
    };
    CHECK(mean_max_share(0.05) > mean_max_share(1.0));
    CHECK(mean_max_share(1.0) > mean_max_share(100.0));
  }

  TEST_CASE("partitions are reproducible from the seed") {
    const auto data = mixture(4, 50, 14);
    for (auto scheme : {boba::PartitionScheme::kPathological, boba::PartitionScheme::kStep,
                        boba::PartitionScheme::kDirichlet}) {
      boba::PartitionSpec spec;
      spec.scheme = scheme;
      spec.honest_count = 8;
      spec.alpha = scheme == boba::PartitionScheme::kStep ? 2.0 : 0.3;
      boba::Rng a(15);
      boba::Rng b(15);
      CHECK(boba::make_partition(data, spec, a).rows == boba::make_partition(data, spec, b).rows);
      CHECK(boba::parse_partition_scheme(boba::partition_scheme_name(scheme)) == scheme);
    }
    CHECK_ERROR_CODE(boba::parse_partition_scheme("iid"), ErrorCode::kConfig);
  }

  TEST_CASE("dataset helpers and CSV round trip") {
    const auto data = mixture(3, 5, 16, 2);
    const auto parts = boba::split_by_class(data);
    REQUIRE(parts.size() == 3);
    for (int z = 0; z < 3; ++z) CHECK(parts[static_cast<size_t>(z)].size() == 5);
    CHECK(boba::concatenate(parts, 3, 2).size() == 15);

    const auto dir = std::filesystem::temp_directory_path() / "boba_datagen_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "data.csv").string();
    boba::save_csv_dataset(data, path);
    const auto back = boba::load_csv_dataset(path, 3);
    CHECK(back.labels == data.labels);
    CHECK((back.features - data.features).norm() == 0.0);

    {
      std::ofstream bad(dir / "bad.csv");
      bad << "f0,f1,label\n1.0,abc,0\n";
    }
    CHECK_ERROR_CODE(boba::load_csv_dataset((dir / "bad.csv").string()), ErrorCode::kInvalidInput);
    CHECK_ERROR_CODE(boba::load_csv_dataset((dir / "missing.csv").string()), ErrorCode::kIo);
    std::filesystem::remove_all(dir);

    LabeledDataset broken = data;
    broken.labels[0] = 7;
    CHECK_ERROR_CODE(boba::validate_dataset(broken), ErrorCode::kInvalidInput);
  }
}
