#include "lmc/memory.hpp"

#include <algorithm>
#include <cmath>

#include "eigen_util.hpp"

namespace lmc::memory {

namespace {

using detail::MatrixRM;

template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
T guarded_norm(const T* v, int n) {
  T s = 0;
  for (int i = 0; i < n; ++i) s += v[i] * v[i];
  return std::max(std::sqrt(s), static_cast<T>(kCosineEpsilon));
}

// Rows scaled to unit length (norm floored at epsilon); also returns the
// floored norms.
template <typename T>
MatrixRM<T> normalize_rows(const MatrixRM<T>& x, Vector<T>& norms) {
  norms.resize(x.rows());
  MatrixRM<T> out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    norms[r] = guarded_norm(x.row(r).data(), static_cast<int>(x.cols()));
    out.row(r) = x.row(r) / norms[r];
  }
  return out;
}

// Row-wise softmax with max subtraction.
template <typename T>
void softmax_rows(MatrixRM<T>& x) {
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const T m = x.row(r).maxCoeff();
    x.row(r) = (x.row(r).array() - m).exp();
    x.row(r) /= x.row(r).sum();
  }
}

// Adjoint of x -> x / max(|x|, eps), row by row.
template <typename T>
MatrixRM<T> normalize_rows_backward(const MatrixRM<T>& grad_hat,
                                    const MatrixRM<T>& hat,
                                    const Vector<T>& norms) {
  const T eps = static_cast<T>(kCosineEpsilon);
  MatrixRM<T> out(grad_hat.rows(), grad_hat.cols());
  for (Eigen::Index r = 0; r < grad_hat.rows(); ++r) {
    if (norms[r] > eps) {
      const T proj = grad_hat.row(r).dot(hat.row(r));
      out.row(r) = (grad_hat.row(r) - proj * hat.row(r)) / norms[r];
    } else {
      out.row(r) = grad_hat.row(r) / eps;
    }
  }
  return out;
}

// z[B, c, L] -> queries [B * L, c]
template <typename T>
MatrixRM<T> gather_queries(const T* z, int batch, int channels, int locations) {
  MatrixRM<T> q(static_cast<Eigen::Index>(batch) * locations, channels);
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < channels; ++c) {
      const T* src = z + (static_cast<std::size_t>(b) * channels + c) * locations;
      for (int l = 0; l < locations; ++l) q(b * locations + l, c) = src[l];
    }
  }
  return q;
}

template <typename T>
void scatter_rows(const MatrixRM<T>& rows, int batch, int channels,
                  int locations, T* dst, bool accumulate) {
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < channels; ++c) {
      T* out = dst + (static_cast<std::size_t>(b) * channels + c) * locations;
      for (int l = 0; l < locations; ++l) {
        const T v = rows(b * locations + l, c);
        out[l] = accumulate ? out[l] + v : v;
      }
    }
  }
}

// Shared forward kernel: addressing weights [L, s] and readouts [L, c].
template <typename T>
struct RecallResult {
  MatrixRM<T> weights;
  MatrixRM<T> features;
};

template <typename T>
RecallResult<T> recall_kernel(const MatrixRM<T>& queries, const MatrixRM<T>& slots) {
  Vector<T> qn, mn;
  const MatrixRM<T> qhat = normalize_rows(queries, qn);
  const MatrixRM<T> mhat = normalize_rows(slots, mn);
  RecallResult<T> r;
  r.weights = qhat * mhat.transpose();
  softmax_rows(r.weights);
  r.features = r.weights * slots;
  return r;
}

void check_grid(const Shape& z, const Shape& slots, const char* op) {
  if (z.size() != 4 || slots.size() != 2 || z[1] != slots[1]) {
    throw ContractError(std::string(op) + ": query grid " + shape_string(z) +
                        " incompatible with memory " + shape_string(slots));
  }
}

}  // namespace

template <typename T>
MemoryBank<T>::MemoryBank(int slots, int channels) {
  if (slots < 1 || channels < 1) {
    throw ContractError("memory bank needs s >= 1 and c >= 1, got s=" +
                        std::to_string(slots) + " c=" + std::to_string(channels));
  }
  slots_ = Parameter<T>(Tensor<T>({slots, channels}));
}

template <typename T>
MemoryBank<T> MemoryBank<T>::random(int slots, int channels, Rng& rng) {
  MemoryBank bank(slots, channels);
  const double bound = 1.0 / std::sqrt(static_cast<double>(channels));
  for (auto& v : bank.slots_.var().mutable_value().values()) {
    v = static_cast<T>(uniform_real(rng, -bound, bound));
  }
  return bank;
}

template <typename T>
T cosine_similarity(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size()) {
    throw ContractError("cosine_similarity: length mismatch " +
                        std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  }
  T dot = 0;
  for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
  const int n = static_cast<int>(u.size());
  return dot / (guarded_norm(u.data(), n) * guarded_norm(v.data(), n));
}

template <typename T>
AddressingVector<T> address(std::span<const T> query, const MemoryBank<T>& bank) {
  if (static_cast<int>(query.size()) != bank.channels()) {
    throw ContractError("address: query length " + std::to_string(query.size()) +
                        " != memory channels " + std::to_string(bank.channels()));
  }
  AddressingVector<T> a;
  a.weights.resize(static_cast<std::size_t>(bank.slot_count()));
  for (int i = 0; i < bank.slot_count(); ++i) {
    a.weights[i] = cosine_similarity(query, bank.row(i));
  }
  const T m = *std::max_element(a.weights.begin(), a.weights.end());
  T total = 0;
  for (auto& w : a.weights) total += (w = std::exp(w - m));
  for (auto& w : a.weights) w /= total;
  return a;
}

template <typename T>
std::vector<T> read(const AddressingVector<T>& addr, const MemoryBank<T>& bank) {
  if (static_cast<int>(addr.weights.size()) != bank.slot_count()) {
    throw ContractError("read: addressing length " +
                        std::to_string(addr.weights.size()) + " != slot count " +
                        std::to_string(bank.slot_count()));
  }
  std::vector<T> out(static_cast<std::size_t>(bank.channels()), T(0));
  for (int i = 0; i < bank.slot_count(); ++i) {
    const auto row = bank.row(i);
    for (int c = 0; c < bank.channels(); ++c) out[c] += addr.weights[i] * row[c];
  }
  return out;
}

template <typename T>
MemoryReadout<T> recall_grid(const MotionContextFeature<T>& z,
                             const MemoryBank<T>& bank) {
  const Shape& s = z.grid.shape();
  if (s.size() != 3 || s[0] != bank.channels()) {
    throw ContractError("recall_grid: grid " + shape_string(s) +
                        " incompatible with memory channels " +
                        std::to_string(bank.channels()));
  }
  const int c = s[0], locations = s[1] * s[2];
  const MatrixRM<T> q = gather_queries(z.grid.data(), 1, c, locations);
  const MatrixRM<T> m =
      Eigen::Map<const MatrixRM<T>>(bank.slots().data(), bank.slot_count(), c);
  const RecallResult<T> r = recall_kernel(q, m);
  MemoryReadout<T> out{Tensor<T>(s)};
  scatter_rows(r.features, 1, c, locations, out.grid.data(), false);
  return out;
}

template <typename T>
Tensor<T> addressing_grid(const Tensor<T>& z, const Tensor<T>& slots) {
  check_grid(z.shape(), slots.shape(), "addressing_grid");
  const int batch = z.dim(0), c = z.dim(1), locations = z.dim(2) * z.dim(3);
  const int s = slots.dim(0);
  const MatrixRM<T> q = gather_queries(z.data(), batch, c, locations);
  const MatrixRM<T> m = Eigen::Map<const MatrixRM<T>>(slots.data(), s, c);
  const RecallResult<T> r = recall_kernel(q, m);
  Tensor<T> out({batch, locations, s});
  std::copy_n(r.weights.data(), out.size(), out.data());
  return out;
}

template <typename T>
Var<T> recall(const Var<T>& z, const Var<T>& slots) {
  check_grid(z.shape(), slots.shape(), "recall");
  const int batch = z.dim(0), c = z.dim(1), locations = z.dim(2) * z.dim(3);
  const int s = slots.dim(0);
  const MatrixRM<T> q = gather_queries(z.value().data(), batch, c, locations);
  const MatrixRM<T> m = Eigen::Map<const MatrixRM<T>>(slots.value().data(), s, c);
  const RecallResult<T> r = recall_kernel(q, m);
  Tensor<T> out(z.shape());
  scatter_rows(r.features, batch, c, locations, out.data(), false);

  return make_result<T>(std::move(out), {z, slots}, [batch, c, locations, s](Node<T>& n) {
    Node<T>& zn = *n.inputs[0];
    Node<T>& mn_node = *n.inputs[1];
    const MatrixRM<T> q = gather_queries(zn.value.data(), batch, c, locations);
    const MatrixRM<T> m =
        Eigen::Map<const MatrixRM<T>>(mn_node.value.data(), s, c);
    const MatrixRM<T> g = gather_queries(n.grad.data(), batch, c, locations);

    Vector<T> qnorm, mnorm;
    const MatrixRM<T> qhat = normalize_rows(q, qnorm);
    const MatrixRM<T> mhat = normalize_rows(m, mnorm);
    MatrixRM<T> a = qhat * mhat.transpose();
    softmax_rows(a);

    // Softmax adjoint: dcos = a * (da - <a, da>).
    const MatrixRM<T> da = g * m.transpose();
    MatrixRM<T> dcos = a.cwiseProduct(da);
    for (Eigen::Index r = 0; r < dcos.rows(); ++r) {
      const T inner = dcos.row(r).sum();
      dcos.row(r) -= inner * a.row(r);
    }

    if (zn.requires_grad) {
      const MatrixRM<T> dq =
          normalize_rows_backward<T>(dcos * mhat, qhat, qnorm);
      scatter_rows(dq, batch, c, locations, zn.grad_buffer().data(), true);
    }
    if (mn_node.requires_grad) {
      MatrixRM<T> dm = a.transpose() * g;
      dm += normalize_rows_backward<T>(dcos.transpose() * qhat, mhat, mnorm);
      Eigen::Map<MatrixRM<T>>(mn_node.grad_buffer().data(), s, c) += dm;
    }
  });
}

#define LMC_INSTANTIATE_MEMORY(T)                                             \
  template class MemoryBank<T>;                                               \
  template T cosine_similarity<T>(std::span<const T>, std::span<const T>);    \
  template AddressingVector<T> address<T>(std::span<const T>,                 \
                                          const MemoryBank<T>&);              \
  template std::vector<T> read<T>(const AddressingVector<T>&,                 \
                                  const MemoryBank<T>&);                      \
  template MemoryReadout<T> recall_grid<T>(const MotionContextFeature<T>&,    \
                                           const MemoryBank<T>&);             \
  template Tensor<T> addressing_grid<T>(const Tensor<T>&, const Tensor<T>&);  \
  template Var<T> recall<T>(const Var<T>&, const Var<T>&);

LMC_INSTANTIATE_MEMORY(float)
LMC_INSTANTIATE_MEMORY(double)

}  // namespace lmc::memory
