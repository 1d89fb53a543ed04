#include "vivecap/sampling.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "random.hpp"

namespace vivecap::cluster {
namespace {

using Kind = ClusteringError::Kind;

std::map<int, std::vector<std::size_t>> members_by_cluster(const ClusterAssignment& a) {
  std::map<int, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < a.labels.size(); ++i)
    if (a.labels[i] >= 0) out[a.labels[i]].push_back(i);
  return out;
}

std::size_t medoid(const EmbeddingMatrix& e, const std::vector<std::size_t>& members, Metric metric) {
  if (members.size() == 1) return members.front();
  std::vector<std::string> ids;
  std::vector<float> values;
  for (std::size_t i : members) {
    ids.push_back(e.ids()[i]);
    auto r = e.row(i);
    values.insert(values.end(), r.begin(), r.end());
  }
  DistanceMatrix d = pairwise_distances(EmbeddingMatrix(std::move(ids), std::move(values), e.dim()), metric);
  std::size_t best = 0;
  double best_sum = 0.0;
  for (std::size_t a = 0; a < members.size(); ++a) {
    double sum = 0.0;
    for (std::size_t b = 0; b < members.size(); ++b) sum += d(a, b);
    const bool better = a == 0 || sum < best_sum ||
                        (sum == best_sum && e.ids()[members[a]] < e.ids()[members[best]]);
    if (better) {
      best = a;
      best_sum = sum;
    }
  }
  return members[best];
}

}  // namespace

const char* to_string(SampleStrategy s) { return s == SampleStrategy::Medoid ? "medoid" : "seeded_random"; }

SampleStrategy parse_sample_strategy(const std::string& s) {
  if (s == "seeded_random") return SampleStrategy::SeededRandom;
  if (s == "medoid") return SampleStrategy::Medoid;
  throw Error("unknown sample strategy: " + s + " (expected seeded_random or medoid)");
}

double SampleManifest::share_percent() const {
  return n_frames == 0 ? 0.0 : 100.0 * static_cast<double>(chosen.size()) / static_cast<double>(n_frames);
}

SampleManifest stratified_sample(const EmbeddingMatrix& e, const ClusterAssignment& assignment,
                                 SampleStrategy strategy, std::uint64_t seed, Metric metric) {
  if (assignment.labels.size() != e.rows())
    throw Error("assignment covers " + std::to_string(assignment.labels.size()) + " points, embeddings have " +
                std::to_string(e.rows()));
  if (assignment.n_clusters == 0) throw ClusteringError(Kind::TooFewPoints, "assignment has no clusters to sample");
  SampleManifest m;
  m.seed = seed;
  m.strategy = strategy;
  m.n_frames = e.rows();
  for (const auto& [cluster, members] : members_by_cluster(assignment)) {
    std::size_t pick;
    if (strategy == SampleStrategy::Medoid) {
      pick = medoid(e, members, metric);
    } else {
      auto rng = detail::make_rng(seed, static_cast<std::uint64_t>(cluster));
      pick = members[detail::uniform_below(rng, members.size())];
    }
    m.chosen[cluster] = e.ids()[pick];
  }
  return m;
}

std::string sample_manifest_to_json(const SampleManifest& m) {
  nlohmann::ordered_json j;
  j["seed"] = m.seed;
  j["strategy"] = to_string(m.strategy);
  j["n_frames"] = m.n_frames;
  auto& rows = j["clusters"] = nlohmann::ordered_json::array();
  for (const auto& [cluster, id] : m.chosen) rows.push_back({{"cluster", cluster}, {"frame_id", id}});
  return j.dump(2) + "\n";
}

SampleManifest sample_manifest_from_json(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    SampleManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.strategy = parse_sample_strategy(j.at("strategy").get<std::string>());
    m.n_frames = j.value("n_frames", std::size_t{0});
    for (const auto& row : j.at("clusters")) {
      int cluster = row.at("cluster").get<int>();
      if (!m.chosen.emplace(cluster, row.at("frame_id").get<std::string>()).second)
        throw Error("sample manifest lists cluster " + std::to_string(cluster) + " twice");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed sample manifest: ") + e.what());
  }
}

std::map<std::string, std::size_t> character_distribution(const std::map<std::string, GoldLabel>& labels,
                                                          const SampleManifest& sample) {
  std::map<std::string, std::size_t> counts;
  for (const auto& [cluster, frame_id] : sample.chosen) {
    auto it = labels.find(frame_id);
    if (it == labels.end()) throw MissingLabelError(frame_id);
    for (const auto& name : it->second.characters) ++counts[name];
  }
  return counts;
}

Projection2d pca_project_2d(const EmbeddingMatrix& e) {
  const auto n = static_cast<Eigen::Index>(e.rows());
  const auto d = static_cast<Eigen::Index>(e.dim());
  if (n < 2) throw ClusteringError(Kind::TooFewPoints, "projection needs at least 2 points");
  if (d < 2) throw ClusteringError(Kind::DegenerateData, "projection needs at least 2 dimensions");

  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = e.row(static_cast<std::size_t>(i))[static_cast<std::size_t>(j)];
  x.rowwise() -= x.colwise().mean();
  if (x.cwiseAbs().maxCoeff() == 0.0) throw ClusteringError(Kind::DegenerateData, "all points are identical");

  Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw ClusteringError(Kind::DegenerateData, "eigen decomposition failed");

  Eigen::MatrixXd dirs(d, 2);
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - k);  // eigenvalues ascend
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    dirs.col(k) = v;
  }
  Eigen::MatrixXd proj = x * dirs;

  Projection2d out;
  out.points.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out.points.push_back({proj(i, 0), proj(i, 1)});
  for (int k = 0; k < 2; ++k) out.variances[k] = proj.col(k).squaredNorm() / static_cast<double>(n - 1);
  return out;
}

}  // namespace vivecap::cluster
