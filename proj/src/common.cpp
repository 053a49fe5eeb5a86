#include "yoularen/common.hpp"

namespace yoularen {

double spectral_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

double spectral_radius(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    if (m.rows() != m.cols()) throw std::invalid_argument("spectral_radius: matrix is not square");
    Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace yoularen
