#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <functional>
#include <memory>
#include <string_view>
#include <vector>

namespace pdeopt {

// One triangle of the structured mesh. Vertices are counterclockwise; the
// hat-function gradients and area are cached because every assembly and
// norm loop needs them.
struct Triangle {
  std::array<int, 3> v;
  double area;
  std::array<Eigen::Vector2d, 3> grad;
  Eigen::Vector2d centroid;
};

// Uniform triangulation of the unit square: n x n cells, each split along
// the diagonal from its lower-left to its upper-right corner. Immutable
// after construction and shared by reference; the consistent mass matrix,
// the Laplace stiffness matrix and the lumped mass vector are prebuilt since
// every norm and assembly touches them.
class Mesh {
 public:
  explicit Mesh(int cells_per_side);

  int cells_per_side() const { return n_; }
  double h() const { return 1.0 / n_; }
  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  const Eigen::Vector2d& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const std::vector<Eigen::Vector2d>& nodes() const { return nodes_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }

  bool is_boundary(int i) const { return boundary_flag_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& boundary_nodes() const { return boundary_nodes_; }
  const std::vector<int>& interior_nodes() const { return interior_nodes_; }
  // Position of a node inside interior_nodes(), or -1 for boundary nodes.
  int interior_index(int node) const { return interior_index_[static_cast<std::size_t>(node)]; }

  // Consistent P1 mass matrix over all nodes (v' M w integrates products of
  // nodal interpolants exactly).
  const Eigen::SparseMatrix<double>& mass() const { return mass_; }
  // Stiffness of -Laplace over all nodes (no boundary elimination).
  const Eigen::SparseMatrix<double>& laplace_stiffness() const { return stiffness_; }
  // Row sums of the mass matrix; m . v is the exact integral of the
  // interpolant of v.
  const Eigen::VectorXd& lumped_mass() const { return lumped_; }

 private:
  int n_;
  std::vector<Eigen::Vector2d> nodes_;
  std::vector<Triangle> triangles_;
  std::vector<bool> boundary_flag_;
  std::vector<int> boundary_nodes_;
  std::vector<int> interior_nodes_;
  std::vector<int> interior_index_;
  Eigen::SparseMatrix<double> mass_;
  Eigen::SparseMatrix<double> stiffness_;
  Eigen::VectorXd lumped_;
};

using MeshPtr = std::shared_ptr<const Mesh>;

MeshPtr build_mesh(int cells_per_side);

// Piecewise-linear function given by one value per node. Carries the mesh it
// lives on; operations reject fields from different Mesh objects.
class NodalField {
 public:
  NodalField(MeshPtr mesh, Eigen::VectorXd values);

  static NodalField zero(const MeshPtr& mesh);
  static NodalField constant(const MeshPtr& mesh, double value);

  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }
  double operator[](int i) const { return values_[i]; }
  int size() const { return static_cast<int>(values_.size()); }
  const MeshPtr& mesh() const { return mesh_; }

  NodalField operator+(const NodalField& o) const;
  NodalField operator-(const NodalField& o) const;
  NodalField operator*(double s) const;

 private:
  MeshPtr mesh_;
  Eigen::VectorXd values_;
};

inline NodalField operator*(double s, const NodalField& f) { return f * s; }

enum class NormKind { L1, L2, Linf, H10 };

NormKind norm_kind_from_string(std::string_view name);

// L1 is the exact integral of |interpolant| (triangles crossed by the zero
// line are split analytically); L2 uses the consistent mass matrix; Linf is
// the max nodal magnitude; H10 is the gradient seminorm of the interpolant.
double norm(const NodalField& f, NormKind kind);

// Exact integral of the interpolant (lumped-mass dot product).
double integrate(const NodalField& f);

// v' M w: the L2 pairing used throughout for data terms.
double inner_l2(const NodalField& a, const NodalField& b);

// Nodewise sampling of fn; rejects non-finite samples naming the node.
NodalField interpolate(const MeshPtr& mesh,
                       const std::function<double(double, double)>& fn);

// Throws std::invalid_argument unless both fields live on the same Mesh.
void require_same_mesh(const NodalField& a, const NodalField& b,
                       const char* what);

}  // namespace pdeopt
