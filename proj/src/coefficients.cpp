#include "pdeopt/coefficients.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace pdeopt {

namespace {

double sym_min_eig(const Eigen::Matrix2d& A) {
  const double s11 = A(0, 0);
  const double s22 = A(1, 1);
  const double s12 = 0.5 * (A(0, 1) + A(1, 0));
  const double mean = 0.5 * (s11 + s22);
  const double rad = std::sqrt(0.25 * (s11 - s22) * (s11 - s22) + s12 * s12);
  return mean - rad;
}

void require_nonnegative(const NodalField& f, const char* name) {
  if (f.values().size() && f.values().minCoeff() < 0.0) {
    std::ostringstream os;
    os << "coefficients: " << name << " must be nonnegative (min "
       << f.values().minCoeff() << "); df/dy >= 0 would fail";
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

bool CoefficientSet::linear_in_y() const {
  return c3.values().size() == 0 || c3.values().isZero(0.0);
}

Eigen::VectorXd CoefficientSet::f_value(const Eigen::VectorXd& y) const {
  return c0.values().array() + c1.values().array() * y.array() +
         c3.values().array() * y.array().cube();
}

Eigen::VectorXd CoefficientSet::f_prime(const Eigen::VectorXd& y) const {
  return c1.values().array() + 3.0 * c3.values().array() * y.array().square();
}

Eigen::VectorXd CoefficientSet::f_second(const Eigen::VectorXd& y) const {
  return 6.0 * c3.values().array() * y.array();
}

CoefficientSet make_coefficients(const MeshPtr& mesh, const MatrixFn& A,
                                 const VectorFn& b, NodalField c0,
                                 NodalField c1, NodalField c3) {
  if (!mesh) throw std::invalid_argument("coefficients: null mesh");
  for (const NodalField* f : {&c0, &c1, &c3})
    if (f->mesh().get() != mesh.get())
      throw std::invalid_argument("coefficients: c-field lives on a different mesh");
  require_nonnegative(c1, "c1");
  require_nonnegative(c3, "c3");

  CoefficientSet cs{mesh, {}, {}, std::move(c0), std::move(c1), std::move(c3), 0.0};
  cs.A.reserve(mesh->triangles().size());
  cs.b.reserve(mesh->triangles().size());
  double lam = std::numeric_limits<double>::infinity();
  for (const auto& t : mesh->triangles()) {
    Eigen::Matrix2d At = A(t.centroid.x(), t.centroid.y());
    Eigen::Vector2d bt = b(t.centroid.x(), t.centroid.y());
    if (!At.allFinite() || !bt.allFinite())
      throw std::invalid_argument("coefficients: non-finite A or b sample");
    lam = std::min(lam, sym_min_eig(At));
    cs.A.push_back(At);
    cs.b.push_back(bt);
  }
  if (!(lam > 0.0)) {
    std::ostringstream os;
    os << "coefficients: A is not uniformly elliptic (worst symmetric-part "
          "eigenvalue "
       << lam << ")";
    throw std::invalid_argument(os.str());
  }
  cs.lambda_A = lam;

  // sampled-direction confirmation of xi' A xi >= lambda_A |xi|^2
  for (std::size_t t = 0; t < cs.A.size(); ++t) {
    for (int k = 0; k < 8; ++k) {
      const double ang = k * M_PI / 8.0;
      const Eigen::Vector2d xi(std::cos(ang), std::sin(ang));
      if (xi.dot(cs.A[t] * xi) < cs.lambda_A - 1e-12)
        throw std::invalid_argument(
            "coefficients: sampled ellipticity check failed");
    }
  }
  return cs;
}

CoefficientSet isotropic_coefficients(const MeshPtr& mesh, double diffusion,
                                      const Eigen::Vector2d& b, double c0,
                                      double c1, double c3) {
  return make_coefficients(
      mesh,
      [diffusion](double, double) {
        return (diffusion * Eigen::Matrix2d::Identity()).eval();
      },
      [b](double, double) { return b; }, NodalField::constant(mesh, c0),
      NodalField::constant(mesh, c1), NodalField::constant(mesh, c3));
}

}  // namespace pdeopt
