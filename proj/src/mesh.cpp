#include "pdeopt/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace pdeopt {

namespace {

// Exact integral of |l| over a triangle of area A, where l is the linear
// function with vertex values (v0, v1, v2). When the values change sign the
// zero line cuts the triangle into a sub-triangle at the odd-signed vertex
// and a quadrilateral; both pieces integrate in closed form.
double abs_integral_on_triangle(double v0, double v1, double v2, double A) {
  const double sum = v0 + v1 + v2;
  if (v0 >= 0 && v1 >= 0 && v2 >= 0) return A * sum / 3.0;
  if (v0 <= 0 && v1 <= 0 && v2 <= 0) return -A * sum / 3.0;
  double vals[3] = {v0, v1, v2};
  int pos = 0;
  for (double v : vals)
    if (v > 0) ++pos;
  // k is the vertex whose strict sign differs from the other two.
  int k = 0;
  if (pos == 1) {
    while (vals[k] <= 0) ++k;
  } else {
    while (vals[k] >= 0) ++k;
  }
  const double d = vals[k];
  const double e = vals[(k + 1) % 3];
  const double f = vals[(k + 2) % 3];
  const double frac = (d / (d - e)) * (d / (d - f));  // area fraction at k
  const double part = A * frac * d / 3.0;             // integral over that piece
  return std::abs(part) + std::abs(A * sum / 3.0 - part);
}

}  // namespace

Mesh::Mesh(int cells_per_side) : n_(cells_per_side) {
  if (n_ < 2) throw std::invalid_argument("mesh: cells_per_side must be >= 2");
  if (n_ > 4096)
    throw std::invalid_argument("mesh: cells_per_side above 4096 is not supported");

  const int nn = n_ + 1;
  nodes_.reserve(static_cast<std::size_t>(nn) * nn);
  for (int j = 0; j < nn; ++j)
    for (int i = 0; i < nn; ++i)
      nodes_.emplace_back(static_cast<double>(i) / n_, static_cast<double>(j) / n_);

  auto id = [nn](int i, int j) { return j * nn + i; };

  triangles_.reserve(2u * n_ * n_);
  auto push_triangle = [this](int a, int b, int c) {
    Triangle t;
    t.v = {a, b, c};
    const Eigen::Vector2d& p0 = nodes_[static_cast<std::size_t>(a)];
    const Eigen::Vector2d& p1 = nodes_[static_cast<std::size_t>(b)];
    const Eigen::Vector2d& p2 = nodes_[static_cast<std::size_t>(c)];
    const double two_a = (p1.x() - p0.x()) * (p2.y() - p0.y()) -
                         (p2.x() - p0.x()) * (p1.y() - p0.y());
    t.area = 0.5 * two_a;
    t.grad[0] = Eigen::Vector2d(p1.y() - p2.y(), p2.x() - p1.x()) / two_a;
    t.grad[1] = Eigen::Vector2d(p2.y() - p0.y(), p0.x() - p2.x()) / two_a;
    t.grad[2] = Eigen::Vector2d(p0.y() - p1.y(), p1.x() - p0.x()) / two_a;
    t.centroid = (p0 + p1 + p2) / 3.0;
    triangles_.push_back(t);
  };

  for (int j = 0; j < n_; ++j) {
    for (int i = 0; i < n_; ++i) {
      // diagonal from (i, j) to (i+1, j+1)
      push_triangle(id(i, j), id(i + 1, j), id(i + 1, j + 1));
      push_triangle(id(i, j), id(i + 1, j + 1), id(i, j + 1));
    }
  }

  boundary_flag_.assign(nodes_.size(), false);
  interior_index_.assign(nodes_.size(), -1);
  for (int j = 0; j < nn; ++j) {
    for (int i = 0; i < nn; ++i) {
      const int k = id(i, j);
      if (i == 0 || j == 0 || i == n_ || j == n_) {
        boundary_flag_[static_cast<std::size_t>(k)] = true;
        boundary_nodes_.push_back(k);
      } else {
        interior_index_[static_cast<std::size_t>(k)] =
            static_cast<int>(interior_nodes_.size());
        interior_nodes_.push_back(k);
      }
    }
  }

  std::vector<Eigen::Triplet<double>> mt, kt;
  mt.reserve(triangles_.size() * 9);
  kt.reserve(triangles_.size() * 9);
  lumped_ = Eigen::VectorXd::Zero(num_nodes());
  for (const auto& t : triangles_) {
    for (int a = 0; a < 3; ++a) {
      lumped_[t.v[a]] += t.area / 3.0;
      for (int b = 0; b < 3; ++b) {
        mt.emplace_back(t.v[a], t.v[b], t.area * (a == b ? 1.0 / 6.0 : 1.0 / 12.0));
        kt.emplace_back(t.v[a], t.v[b], t.area * t.grad[a].dot(t.grad[b]));
      }
    }
  }
  mass_.resize(num_nodes(), num_nodes());
  mass_.setFromTriplets(mt.begin(), mt.end());
  stiffness_.resize(num_nodes(), num_nodes());
  stiffness_.setFromTriplets(kt.begin(), kt.end());
}

MeshPtr build_mesh(int cells_per_side) {
  return std::make_shared<const Mesh>(cells_per_side);
}

NodalField::NodalField(MeshPtr mesh, Eigen::VectorXd values)
    : mesh_(std::move(mesh)), values_(std::move(values)) {
  if (!mesh_) throw std::invalid_argument("field: null mesh");
  if (values_.size() != mesh_->num_nodes())
    throw std::invalid_argument("field: value count does not match node count");
}

NodalField NodalField::zero(const MeshPtr& mesh) {
  return NodalField(mesh, Eigen::VectorXd::Zero(mesh->num_nodes()));
}

NodalField NodalField::constant(const MeshPtr& mesh, double value) {
  return NodalField(mesh, Eigen::VectorXd::Constant(mesh->num_nodes(), value));
}

void require_same_mesh(const NodalField& a, const NodalField& b, const char* what) {
  if (a.mesh().get() != b.mesh().get()) {
    std::ostringstream os;
    os << what << ": fields live on different meshes";
    throw std::invalid_argument(os.str());
  }
}

NodalField NodalField::operator+(const NodalField& o) const {
  require_same_mesh(*this, o, "field sum");
  return NodalField(mesh_, values_ + o.values_);
}

NodalField NodalField::operator-(const NodalField& o) const {
  require_same_mesh(*this, o, "field difference");
  return NodalField(mesh_, values_ - o.values_);
}

NodalField NodalField::operator*(double s) const {
  return NodalField(mesh_, values_ * s);
}

NormKind norm_kind_from_string(std::string_view name) {
  if (name == "L1") return NormKind::L1;
  if (name == "L2") return NormKind::L2;
  if (name == "Linf") return NormKind::Linf;
  if (name == "H10") return NormKind::H10;
  throw std::invalid_argument("unknown norm kind: " + std::string(name));
}

double norm(const NodalField& f, NormKind kind) {
  const Mesh& m = *f.mesh();
  const Eigen::VectorXd& v = f.values();
  switch (kind) {
    case NormKind::L1: {
      double acc = 0.0;
      for (const auto& t : m.triangles())
        acc += abs_integral_on_triangle(v[t.v[0]], v[t.v[1]], v[t.v[2]], t.area);
      return acc;
    }
    case NormKind::L2:
      return std::sqrt(std::max(0.0, v.dot(m.mass() * v)));
    case NormKind::Linf:
      return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0;
    case NormKind::H10:
      return std::sqrt(std::max(0.0, v.dot(m.laplace_stiffness() * v)));
  }
  throw std::invalid_argument("unknown norm kind");
}

double integrate(const NodalField& f) {
  return f.mesh()->lumped_mass().dot(f.values());
}

double inner_l2(const NodalField& a, const NodalField& b) {
  require_same_mesh(a, b, "inner_l2");
  return a.values().dot(a.mesh()->mass() * b.values());
}

NodalField interpolate(const MeshPtr& mesh,
                       const std::function<double(double, double)>& fn) {
  Eigen::VectorXd v(mesh->num_nodes());
  for (int i = 0; i < mesh->num_nodes(); ++i) {
    const auto& p = mesh->node(i);
    const double val = fn(p.x(), p.y());
    if (!std::isfinite(val)) {
      std::ostringstream os;
      os << "interpolate: non-finite value at node " << i << " = (" << p.x()
         << ", " << p.y() << ")";
      throw std::invalid_argument(os.str());
    }
    v[i] = val;
  }
  return NodalField(mesh, std::move(v));
}

}  // namespace pdeopt
