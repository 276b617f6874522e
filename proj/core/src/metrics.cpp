#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <boost/math/distributions/chi_squared.hpp>

#include "relpose/errors.hpp"
#include "relpose/sim.hpp"

namespace relpose {

std::vector<PairError> poseErrors(const State3& estimate, const State3& truth)
{
  if (estimate.size() != truth.size()) {
    throw std::invalid_argument("poseErrors: state sizes differ");
  }
  std::vector<PairError> out;
  out.reserve(truth.size());
  for (std::size_t p = 0; p < truth.size(); ++p) {
    const Eigen::Matrix3d dc = truth.poses[p].rotation().transpose() * estimate.poses[p].rotation();
    // acos of the trace is fine away from 0 and pi; atan2 form is stable everywhere
    const Eigen::Vector3d axis(dc(2, 1) - dc(1, 2), dc(0, 2) - dc(2, 0), dc(1, 0) - dc(0, 1));
    const double angle = std::atan2(0.5 * axis.norm(), 0.5 * (dc.trace() - 1.0));
    const double pos = (estimate.poses[p].translation() - truth.poses[p].translation()).norm();
    out.push_back(PairError{angle, pos});
  }
  return out;
}

double rmse(std::span<const double> errors)
{
  if (errors.empty()) {
    throw std::invalid_argument("rmse: empty input");
  }
  double sq = 0.0;
  for (const double e : errors) {
    sq += e * e;
  }
  return std::sqrt(sq / static_cast<double>(errors.size()));
}

double nees(const State3& estimate, const Eigen::MatrixXd& covariance, const State3& truth)
{
  const Eigen::VectorXd e = tangentDifference<3>(truth, estimate);
  if (covariance.rows() != e.size() || covariance.cols() != e.size()) {
    throw std::invalid_argument("nees: covariance size mismatch");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (covariance + covariance.transpose()));
  if (llt.info() != Eigen::Success) {
    throw NumericalFailureError("nees: covariance is not positive definite");
  }
  return llt.matrixL().solve(e).squaredNorm();
}

ChiSquareInterval averageNeesInterval(int dof, int trials, double confidence)
{
  if (dof < 1 || trials < 1 || !(confidence > 0.0 && confidence < 1.0)) {
    throw std::invalid_argument("averageNeesInterval: invalid arguments");
  }
  const double k = static_cast<double>(dof) * trials;
  const boost::math::chi_squared dist(k);
  const double tail = 0.5 * (1.0 - confidence);
  return ChiSquareInterval{boost::math::quantile(dist, tail) / trials,
                           boost::math::quantile(dist, 1.0 - tail) / trials};
}

double median(std::vector<double> values)
{
  if (values.empty()) {
    throw std::invalid_argument("median: empty input");
  }
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double hi = values[mid];
  if (values.size() % 2 == 1) {
    return hi;
  }
  const double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

TrialSeeds deriveSeeds(std::uint64_t masterSeed, std::size_t trial)
{
  const std::uint64_t base = splitmix64(masterSeed ^ splitmix64(static_cast<std::uint64_t>(trial)));
  return TrialSeeds{splitmix64(base + 1), splitmix64(base + 2), splitmix64(base + 3)};
}

const char* filterName(FilterKind kind)
{
  switch (kind) {
    case FilterKind::Ekf: return "ekf";
    case FilterKind::Gsf: return "gsf";
    case FilterKind::Pf: return "pf";
  }
  return "unknown";
}

FilterKind parseFilterKind(const std::string& name)
{
  if (name == "ekf") {
    return FilterKind::Ekf;
  }
  if (name == "gsf") {
    return FilterKind::Gsf;
  }
  if (name == "pf") {
    return FilterKind::Pf;
  }
  throw std::invalid_argument("unknown filter '" + name + "' (expected ekf, gsf or pf)");
}

namespace {

double pooledRmse(const FilterTrace& t, bool attitude)
{
  std::vector<double> all;
  for (const auto& step : t.errors) {
    for (const auto& e : step) {
      all.push_back(attitude ? e.attitude : e.position);
    }
  }
  return rmse(all);
}

}  // namespace

double FilterTrace::attitudeRmse() const { return pooledRmse(*this, true); }
double FilterTrace::positionRmse() const { return pooledRmse(*this, false); }

}  // namespace relpose
