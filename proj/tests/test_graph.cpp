#include <catch2/catch_amalgamated.hpp>

#include "netcausal/graph.hpp"
#include "netcausal/knn.hpp"

#include "helpers.hpp"

using namespace netcausal;

TEST_CASE("knn on a line picks nearest neighbors and symmetrizes by union") {
  Mat x(3, 1);
  x << 0.0, 1.0, 10.0;
  Graph g = build_knn_graph(x, 1, Metric::euclidean);
  CHECK(g.neighbors(0) == std::vector<int>{1});
  CHECK(g.neighbors(1) == std::vector<int>{0, 2});
  CHECK(g.neighbors(2) == std::vector<int>{1});
}

TEST_CASE("knn with k = n-1 yields the complete graph") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  Mat x(5, 3);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 3; ++j) x(i, j) = nd(rng);
  Graph g = build_knn_graph(x, 4, Metric::euclidean);
  for (int i = 0; i < 5; ++i) CHECK(g.degree(i) == 4);
}

TEST_CASE("knn ties resolve to the lower index") {
  Mat x(3, 1);
  x << 0.0, 0.0, 1.0;
  Graph g = build_knn_graph(x, 1, Metric::euclidean);
  // identical rows 0 and 1 link mutually; node 2 is equidistant to both
  // and must pick node 0.
  CHECK(g.neighbors(0) == std::vector<int>{1, 2});
  CHECK(g.neighbors(1) == std::vector<int>{0});
  CHECK(g.neighbors(2) == std::vector<int>{0});
}

TEST_CASE("knn input validation") {
  Mat x = Mat::Zero(3, 2);
  x(1, 0) = 1.0;
  x(2, 1) = 1.0;
  CHECK_THROWS_AS(build_knn_graph(x, 1, Metric::cosine), invalid_input);
  Mat y = Mat::Random(4, 2);
  CHECK_THROWS_AS(build_knn_graph(y, 4, Metric::euclidean), invalid_input);
  CHECK_THROWS_AS(build_knn_graph(y, 0, Metric::euclidean), invalid_input);
}

TEST_CASE("knn degrees are at least k and adjacency is symmetric") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> nd;
  Mat x(30, 5);
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j) x(i, j) = nd(rng);
  for (Metric m : {Metric::cosine, Metric::euclidean}) {
    Graph g = build_knn_graph(x, 4, m);
    for (int i = 0; i < g.size(); ++i) {
      CHECK(g.degree(i) >= 4);
      for (int j : g.neighbors(i)) {
        const auto& back = g.neighbors(j);
        CHECK(std::binary_search(back.begin(), back.end(), i));
      }
    }
  }
}

TEST_CASE("two_hop on path, clique, and star") {
  Graph path = Graph::from_edges(3, {{0, 1}, {1, 2}});
  CHECK(path.two_hop(0) == std::vector<int>{2});

  Graph k3 = Graph::from_edges(3, {{0, 1}, {1, 2}, {0, 2}});
  for (int i = 0; i < 3; ++i) CHECK(k3.two_hop(i).empty());

  Graph star = Graph::from_edges(6, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}});
  CHECK(star.two_hop(1) == std::vector<int>{2, 3, 4, 5});
  CHECK(star.two_hop(0).empty());

  CHECK_THROWS_AS(path.two_hop(3), invalid_input);
  CHECK_THROWS_AS(path.two_hop(-1), invalid_input);
}

TEST_CASE("two_hop is disjoint from the closed neighborhood") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    Graph g = testutil::random_er_graph(15, 0.2, rng);
    for (int i = 0; i < g.size(); ++i) {
      auto th = g.two_hop(i);
      const auto& nb = g.neighbors(i);
      for (int k : th) {
        CHECK(k != i);
        CHECK(!std::binary_search(nb.begin(), nb.end(), k));
      }
    }
  }
}

TEST_CASE("normalized adjacency on hand-checked graphs") {
  Graph lone = Graph::from_edges(1, {});
  auto s1 = normalized_adjacency(lone);
  REQUIRE(s1.rows[0].size() == 1);
  CHECK(s1.rows[0][0].first == 0);
  CHECK(s1.rows[0][0].second == Catch::Approx(1.0));

  Graph pair = Graph::from_edges(2, {{0, 1}});
  Mat d = testutil::dense_of(normalized_adjacency(pair));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(d(i, j) == Catch::Approx(0.5));

  Graph path = Graph::from_edges(3, {{0, 1}, {1, 2}});
  Mat dp = testutil::dense_of(normalized_adjacency(path));
  CHECK(dp(0, 1) == Catch::Approx(1.0 / std::sqrt(6.0)));
  CHECK(dp(1, 0) == Catch::Approx(1.0 / std::sqrt(6.0)));
  CHECK(dp(0, 0) == Catch::Approx(0.5));
  CHECK(dp(1, 1) == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("normalized adjacency matches the dense oracle on random graphs") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 2 + static_cast<int>(rng() % 19);
    Graph g = testutil::random_er_graph(n, 0.3, rng);
    Mat a = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      a(i, i) = 1.0;
      for (int j : g.neighbors(i)) a(i, j) = 1.0;
    }
    Vec dinv(n);
    for (int i = 0; i < n; ++i) dinv[i] = 1.0 / std::sqrt(1.0 + g.degree(i));
    Mat oracle = dinv.asDiagonal() * a * dinv.asDiagonal();
    NormAdjacency na = normalized_adjacency(g);
    Mat got = testutil::dense_of(na);
    CHECK((got - oracle).cwiseAbs().maxCoeff() < 1e-12);

    for (int i = 0; i < n; ++i)
      for (auto [j, v] : na.rows[i]) {
        CHECK(v > 0.0);
        CHECK(v <= 1.0);
      }
  }
}

TEST_CASE("sparse apply matches dense multiplication") {
  std::mt19937_64 rng(13);
  Graph g = testutil::random_er_graph(12, 0.3, rng);
  Mat h = Mat::Random(12, 4);
  for (const SparseRows& s :
       {normalized_adjacency(g), neighbor_mean(g), neighbor_mean_with_self(g)}) {
    Mat dense = testutil::dense_of(s);
    CHECK((s.apply(h) - dense * h).cwiseAbs().maxCoeff() < 1e-12);
    Mat u = Mat::Random(12, 4);
    CHECK((s.apply_transpose(u) - dense.transpose() * u).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("neighbor mean operators") {
  Graph g = Graph::from_edges(4, {{0, 1}, {0, 2}});
  Mat h(4, 1);
  h << 1.0, 2.0, 4.0, 8.0;
  Mat m = neighbor_mean(g).apply(h);
  CHECK(m(0, 0) == Catch::Approx(3.0));
  CHECK(m(1, 0) == Catch::Approx(1.0));
  CHECK(m(3, 0) == 0.0);  // isolated: empty row
  Mat ms = neighbor_mean_with_self(g).apply(h);
  CHECK(ms(0, 0) == Catch::Approx((1.0 + 2.0 + 4.0) / 3.0));
  CHECK(ms(3, 0) == Catch::Approx(8.0));
}

TEST_CASE("edge list loading") {
  testutil::TempDir td;
  auto p = testutil::write_file(td.path() / "edges.txt", "0 1\n1 0\n2 2\n");
  Graph g = load_edge_list(p, 3);
  CHECK(g.neighbors(0) == std::vector<int>{1});
  CHECK(g.neighbors(1) == std::vector<int>{0});
  CHECK(g.degree(2) == 0);

  auto empty = testutil::write_file(td.path() / "empty.txt", "");
  Graph ge = load_edge_list(empty, 4);
  CHECK(ge.size() == 4);
  CHECK(ge.max_degree() == 0);

  auto bad = testutil::write_file(td.path() / "bad.txt", "0 5\n");
  try {
    load_edge_list(bad, 3);
    FAIL("expected parse error");
  } catch (const parse_error& e) {
    CHECK(std::string(e.what()).find(":1") != std::string::npos);
  }

  auto mal = testutil::write_file(td.path() / "mal.txt", "0 1\nnope\n");
  CHECK_THROWS_AS(load_edge_list(mal, 3), parse_error);
  auto trail = testutil::write_file(td.path() / "trail.txt", "0 1 2\n");
  CHECK_THROWS_AS(load_edge_list(trail, 3), parse_error);
}
