#include "tshint/graph.hpp"

#include <Eigen/Core>

#include <cmath>
#include <numbers>

#include "tshint/util.hpp"

namespace tshint {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<EMat>;
using CMap = Eigen::Map<const EMat>;

CMap as_mat(const Tensor& t) {
  return CMap(t.data(), static_cast<Eigen::Index>(t.rows()),
              static_cast<Eigen::Index>(t.cols()));
}

Map as_mat(Tensor& t) {
  return Map(t.data(), static_cast<Eigen::Index>(t.rows()),
             static_cast<Eigen::Index>(t.cols()));
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw Error(std::string(op) + ": expected rank-2 tensor, got " + t.shape_str());
  }
}

double gelu_value(double x) {
  return 0.5 * x * (1.0 + std::erf(x * (1.0 / std::numbers::sqrt2)));
}

double gelu_derivative(double x) {
  constexpr double inv_sqrt_2pi = 0.3989422804014327;
  return 0.5 * (1.0 + std::erf(x * (1.0 / std::numbers::sqrt2))) +
         x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

}  // namespace

const Tensor& GradientMap::at(NodeId id) const {
  auto it = grads_.find(id);
  if (it == grads_.end()) throw Error("no gradient recorded for node " + std::to_string(id));
  return it->second;
}

NodeId Graph::push(Node n, const char* op_name) {
  if (!n.value.all_finite()) {
    throw Error(std::string("non-finite values after op '") + op_name + "'");
  }
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::constant(Tensor v) {
  Node n;
  n.leaf = Leaf::Constant;
  n.value = std::move(v);
  return push(std::move(n), "constant");
}

NodeId Graph::input(Tensor v) {
  Node n;
  n.leaf = Leaf::Input;
  n.needs_grad = true;
  n.value = std::move(v);
  return push(std::move(n), "input");
}

NodeId Graph::parameter(Tensor v) {
  Node n;
  n.leaf = Leaf::Parameter;
  n.needs_grad = true;
  n.value = std::move(v);
  return push(std::move(n), "parameter");
}

NodeId Graph::add(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (!va.same_shape(vb)) {
    throw Error("add: shape mismatch " + va.shape_str() + " vs " + vb.shape_str());
  }
  Node n;
  n.op = Op::Add;
  n.parents = {a, b};
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = va;
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += vb[i];
  return push(std::move(n), "add");
}

NodeId Graph::add_row(NodeId a, NodeId row) {
  const Tensor& va = value(a);
  const Tensor& vr = value(row);
  require_matrix(va, "add_row");
  require_matrix(vr, "add_row");
  if (vr.rows() != 1 || vr.cols() != va.cols()) {
    throw Error("add_row: row shape " + vr.shape_str() + " does not broadcast over " +
                va.shape_str());
  }
  Node n;
  n.op = Op::AddRow;
  n.parents = {a, row};
  n.needs_grad = node(a).needs_grad || node(row).needs_grad;
  n.value = va;
  std::size_t cols = va.cols();
  for (std::size_t r = 0; r < va.rows(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) n.value[r * cols + c] += vr[c];
  }
  return push(std::move(n), "add_row");
}

NodeId Graph::scale(NodeId a, double c) {
  Node n;
  n.op = Op::Scale;
  n.parents = {a};
  n.needs_grad = node(a).needs_grad;
  n.scalar = c;
  n.value = value(a);
  for (double& v : n.value.vec()) v *= c;
  return push(std::move(n), "scale");
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  require_matrix(va, "matmul");
  require_matrix(vb, "matmul");
  if (va.cols() != vb.rows()) {
    throw Error("matmul: inner dims mismatch " + va.shape_str() + " x " + vb.shape_str());
  }
  Node n;
  n.op = Op::MatMul;
  n.parents = {a, b};
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  n.value = Tensor({va.rows(), vb.cols()});
  as_mat(n.value).noalias() = as_mat(va) * as_mat(vb);
  return push(std::move(n), "matmul");
}

NodeId Graph::transpose(NodeId a) {
  const Tensor& va = value(a);
  require_matrix(va, "transpose");
  Node n;
  n.op = Op::Transpose;
  n.parents = {a};
  n.needs_grad = node(a).needs_grad;
  n.value = Tensor({va.cols(), va.rows()});
  as_mat(n.value) = as_mat(va).transpose();
  return push(std::move(n), "transpose");
}

NodeId Graph::reshape(NodeId a, std::vector<std::size_t> shape) {
  const Tensor& va = value(a);
  Tensor out(std::move(shape), va.vec());
  Node n;
  n.op = Op::Reshape;
  n.parents = {a};
  n.needs_grad = node(a).needs_grad;
  n.value = std::move(out);
  return push(std::move(n), "reshape");
}

NodeId Graph::relu(NodeId a) {
  Node n;
  n.op = Op::Relu;
  n.parents = {a};
  n.needs_grad = node(a).needs_grad;
  n.value = value(a);
  for (double& v : n.value.vec()) v = v > 0.0 ? v : 0.0;
  return push(std::move(n), "relu");
}

NodeId Graph::gelu(NodeId a) {
  Node n;
  n.op = Op::Gelu;
  n.parents = {a};
  n.needs_grad = node(a).needs_grad;
  n.value = value(a);
  for (double& v : n.value.vec()) v = gelu_value(v);
  return push(std::move(n), "gelu");
}

NodeId Graph::softmax_rows(NodeId a) {
  const Tensor& va = value(a);
  require_matrix(va, "softmax_rows");
  Node n;
  n.op = Op::SoftmaxRows;
  n.parents = {a};
  n.needs_grad = node(a).needs_grad;
  n.value = va;
  std::size_t cols = va.cols();
  for (std::size_t r = 0; r < va.rows(); ++r) {
    double* row = n.value.data() + r * cols;
    double mx = row[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
    double denom = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = std::exp(row[c] - mx);
      denom += row[c];
    }
    for (std::size_t c = 0; c < cols; ++c) row[c] /= denom;
  }
  return push(std::move(n), "softmax_rows");
}

NodeId Graph::layernorm(NodeId x, NodeId gain, NodeId bias, double eps) {
  const Tensor& vx = value(x);
  const Tensor& vg = value(gain);
  const Tensor& vb = value(bias);
  require_matrix(vx, "layernorm");
  std::size_t cols = vx.cols();
  if (vg.shape() != std::vector<std::size_t>{1, cols} || !vg.same_shape(vb)) {
    throw Error("layernorm: gain/bias must be [1x" + std::to_string(cols) + "]");
  }
  Node n;
  n.op = Op::LayerNorm;
  n.parents = {x, gain, bias};
  n.needs_grad = node(x).needs_grad || node(gain).needs_grad || node(bias).needs_grad;
  n.scalar = eps;
  n.value = vx;
  for (std::size_t r = 0; r < vx.rows(); ++r) {
    double* row = n.value.data() + r * cols;
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += row[c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      double d = row[c] - mu;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    double inv_std = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = (row[c] - mu) * inv_std * vg[c] + vb[c];
    }
  }
  return push(std::move(n), "layernorm");
}

NodeId Graph::mean(NodeId a) {
  const Tensor& va = value(a);
  double m = 0.0;
  for (double v : va.vec()) m += v;
  m /= static_cast<double>(va.size());
  Node n;
  n.op = Op::Mean;
  n.parents = {a};
  n.needs_grad = node(a).needs_grad;
  n.value = Tensor::scalar(m);
  return push(std::move(n), "mean");
}

NodeId Graph::sum(NodeId a) {
  const Tensor& va = value(a);
  double s = 0.0;
  for (double v : va.vec()) s += v;
  Node n;
  n.op = Op::Sum;
  n.parents = {a};
  n.needs_grad = node(a).needs_grad;
  n.value = Tensor::scalar(s);
  return push(std::move(n), "sum");
}

NodeId Graph::mse_loss(NodeId pred, NodeId target) {
  const Tensor& vp = value(pred);
  const Tensor& vt = value(target);
  if (!vp.same_shape(vt)) {
    throw Error("mse_loss: shape mismatch " + vp.shape_str() + " vs " + vt.shape_str());
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < vp.size(); ++i) {
    double d = vp[i] - vt[i];
    acc += d * d;
  }
  acc /= static_cast<double>(vp.size());
  Node n;
  n.op = Op::MseLoss;
  n.parents = {pred, target};
  n.needs_grad = node(pred).needs_grad || node(target).needs_grad;
  n.value = Tensor::scalar(acc);
  return push(std::move(n), "mse_loss");
}

NodeId Graph::concat_cols(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw Error("concat_cols: no parts");
  std::size_t rows = value(parts[0]).rows();
  std::size_t cols = 0;
  bool needs = false;
  for (NodeId p : parts) {
    require_matrix(value(p), "concat_cols");
    if (value(p).rows() != rows) throw Error("concat_cols: row count mismatch");
    cols += value(p).cols();
    needs = needs || node(p).needs_grad;
  }
  Node n;
  n.op = Op::ConcatCols;
  n.parents = parts;
  n.needs_grad = needs;
  n.value = Tensor({rows, cols});
  std::size_t offset = 0;
  for (NodeId p : parts) {
    const Tensor& vp = value(p);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < vp.cols(); ++c) {
        n.value.vec()[r * cols + offset + c] = vp[r * vp.cols() + c];
      }
    }
    offset += vp.cols();
  }
  return push(std::move(n), "concat_cols");
}

NodeId Graph::concat_rows(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw Error("concat_rows: no parts");
  std::size_t cols = value(parts[0]).cols();
  std::size_t rows = 0;
  bool needs = false;
  for (NodeId p : parts) {
    require_matrix(value(p), "concat_rows");
    if (value(p).cols() != cols) throw Error("concat_rows: column count mismatch");
    rows += value(p).rows();
    needs = needs || node(p).needs_grad;
  }
  Node n;
  n.op = Op::ConcatRows;
  n.parents = parts;
  n.needs_grad = needs;
  n.value = Tensor({rows, cols});
  std::size_t offset = 0;
  for (NodeId p : parts) {
    const Tensor& vp = value(p);
    std::copy(vp.vec().begin(), vp.vec().end(), n.value.vec().begin() + offset);
    offset += vp.size();
  }
  return push(std::move(n), "concat_rows");
}

NodeId Graph::patchify(NodeId series, std::size_t channel, std::size_t patch_len,
                       std::size_t stride) {
  const Tensor& vs = value(series);
  require_matrix(vs, "patchify");
  std::size_t t_len = vs.cols();
  if (channel >= vs.rows()) throw Error("patchify: channel out of range");
  if (patch_len == 0 || stride == 0 || patch_len > t_len) {
    throw Error("patchify: invalid patch_len/stride for series length " +
                std::to_string(t_len));
  }
  std::size_t n_patches = (t_len - patch_len) / stride + 1;
  Node n;
  n.op = Op::Patchify;
  n.parents = {series};
  n.needs_grad = node(series).needs_grad;
  n.patch_len = patch_len;
  n.stride = stride;
  n.channel = channel;
  n.value = Tensor({n_patches, patch_len});
  const double* src = vs.data() + channel * t_len;
  for (std::size_t j = 0; j < n_patches; ++j) {
    for (std::size_t t = 0; t < patch_len; ++t) {
      n.value.vec()[j * patch_len + t] = src[j * stride + t];
    }
  }
  return push(std::move(n), "patchify");
}

GradientMap Graph::backward(NodeId loss) const {
  if (loss >= nodes_.size()) throw Error("backward: unknown loss node");
  if (!nodes_[loss].value.is_scalar()) {
    throw Error("backward: loss must be scalar, got " + nodes_[loss].value.shape_str());
  }

  GradientMap out;
  // Leaves unreachable from the loss report zeros.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& nd = nodes_[i];
    if (nd.leaf == Leaf::Input || nd.leaf == Leaf::Parameter) {
      out.grads_.emplace(static_cast<NodeId>(i), Tensor::zeros(nd.value.shape()));
    }
  }

  std::vector<Tensor> grads(nodes_.size());
  grads[loss] = Tensor::full(nodes_[loss].value.shape(), 1.0);

  auto accum = [&](NodeId parent, auto&& fill) {
    if (!nodes_[parent].needs_grad) return;
    if (grads[parent].size() == 0) grads[parent] = Tensor::zeros(nodes_[parent].value.shape());
    fill(grads[parent]);
  };

  // Tape order is a topological order: each node is visited exactly once,
  // after everything that consumes it.
  for (NodeId id = loss + 1; id-- > 0;) {
    if (grads[id].size() == 0 || !nodes_[id].needs_grad) {
      grads[id] = Tensor();
      continue;
    }
    const Node& nd = nodes_[id];
    const Tensor& g = grads[id];
    switch (nd.op) {
      case Op::Leaf: {
        if (nd.leaf == Leaf::Input || nd.leaf == Leaf::Parameter) {
          out.grads_[id] = g;
        }
        break;
      }
      case Op::Add: {
        for (NodeId p : nd.parents) {
          accum(p, [&](Tensor& dst) {
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
          });
        }
        break;
      }
      case Op::AddRow: {
        accum(nd.parents[0], [&](Tensor& dst) {
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
        });
        accum(nd.parents[1], [&](Tensor& dst) {
          std::size_t cols = g.cols();
          for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t c = 0; c < cols; ++c) dst[c] += g[r * cols + c];
          }
        });
        break;
      }
      case Op::Scale: {
        accum(nd.parents[0], [&](Tensor& dst) {
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += nd.scalar * g[i];
        });
        break;
      }
      case Op::MatMul: {
        const Tensor& va = nodes_[nd.parents[0]].value;
        const Tensor& vb = nodes_[nd.parents[1]].value;
        accum(nd.parents[0], [&](Tensor& dst) {
          as_mat(dst).noalias() += as_mat(g) * as_mat(vb).transpose();
        });
        accum(nd.parents[1], [&](Tensor& dst) {
          as_mat(dst).noalias() += as_mat(va).transpose() * as_mat(g);
        });
        break;
      }
      case Op::Transpose: {
        accum(nd.parents[0], [&](Tensor& dst) { as_mat(dst) += as_mat(g).transpose(); });
        break;
      }
      case Op::Reshape: {
        accum(nd.parents[0], [&](Tensor& dst) {
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
        });
        break;
      }
      case Op::Relu: {
        const Tensor& vx = nodes_[nd.parents[0]].value;
        accum(nd.parents[0], [&](Tensor& dst) {
          for (std::size_t i = 0; i < dst.size(); ++i) {
            if (vx[i] > 0.0) dst[i] += g[i];
          }
        });
        break;
      }
      case Op::Gelu: {
        const Tensor& vx = nodes_[nd.parents[0]].value;
        accum(nd.parents[0], [&](Tensor& dst) {
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * gelu_derivative(vx[i]);
        });
        break;
      }
      case Op::SoftmaxRows: {
        const Tensor& y = nd.value;
        accum(nd.parents[0], [&](Tensor& dst) {
          std::size_t cols = y.cols();
          for (std::size_t r = 0; r < y.rows(); ++r) {
            const double* yr = y.data() + r * cols;
            const double* gr = g.data() + r * cols;
            double dot = 0.0;
            for (std::size_t c = 0; c < cols; ++c) dot += yr[c] * gr[c];
            double* dr = dst.data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) dr[c] += yr[c] * (gr[c] - dot);
          }
        });
        break;
      }
      case Op::LayerNorm: {
        const Tensor& vx = nodes_[nd.parents[0]].value;
        const Tensor& vg = nodes_[nd.parents[1]].value;
        std::size_t cols = vx.cols();
        double inv_n = 1.0 / static_cast<double>(cols);
        // Recompute per-row stats; cheaper than caching them on the tape.
        std::vector<double> xhat(cols);
        for (std::size_t r = 0; r < vx.rows(); ++r) {
          const double* xr = vx.data() + r * cols;
          const double* gr = g.data() + r * cols;
          double mu = 0.0;
          for (std::size_t c = 0; c < cols; ++c) mu += xr[c];
          mu *= inv_n;
          double var = 0.0;
          for (std::size_t c = 0; c < cols; ++c) {
            double d = xr[c] - mu;
            var += d * d;
          }
          var *= inv_n;
          double inv_std = 1.0 / std::sqrt(var + nd.scalar);
          double mean_gy = 0.0, mean_gyx = 0.0;
          for (std::size_t c = 0; c < cols; ++c) {
            xhat[c] = (xr[c] - mu) * inv_std;
            double gy = gr[c] * vg[c];
            mean_gy += gy;
            mean_gyx += gy * xhat[c];
          }
          mean_gy *= inv_n;
          mean_gyx *= inv_n;
          accum(nd.parents[0], [&](Tensor& dst) {
            double* dr = dst.data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) {
              double gy = gr[c] * vg[c];
              dr[c] += inv_std * (gy - mean_gy - xhat[c] * mean_gyx);
            }
          });
          accum(nd.parents[1], [&](Tensor& dst) {
            for (std::size_t c = 0; c < cols; ++c) dst[c] += gr[c] * xhat[c];
          });
          accum(nd.parents[2], [&](Tensor& dst) {
            for (std::size_t c = 0; c < cols; ++c) dst[c] += gr[c];
          });
        }
        break;
      }
      case Op::Mean: {
        const Tensor& vx = nodes_[nd.parents[0]].value;
        double gv = g.scalar_value() / static_cast<double>(vx.size());
        accum(nd.parents[0], [&](Tensor& dst) {
          for (double& v : dst.vec()) v += gv;
        });
        break;
      }
      case Op::Sum: {
        double gv = g.scalar_value();
        accum(nd.parents[0], [&](Tensor& dst) {
          for (double& v : dst.vec()) v += gv;
        });
        break;
      }
      case Op::MseLoss: {
        const Tensor& vp = nodes_[nd.parents[0]].value;
        const Tensor& vt = nodes_[nd.parents[1]].value;
        double gv = 2.0 * g.scalar_value() / static_cast<double>(vp.size());
        accum(nd.parents[0], [&](Tensor& dst) {
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gv * (vp[i] - vt[i]);
        });
        accum(nd.parents[1], [&](Tensor& dst) {
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= gv * (vp[i] - vt[i]);
        });
        break;
      }
      case Op::ConcatCols: {
        std::size_t cols = g.cols();
        std::size_t offset = 0;
        for (NodeId p : nd.parents) {
          const Tensor& vp = nodes_[p].value;
          std::size_t pc = vp.cols();
          accum(p, [&](Tensor& dst) {
            for (std::size_t r = 0; r < vp.rows(); ++r) {
              for (std::size_t c = 0; c < pc; ++c) {
                dst[r * pc + c] += g[r * cols + offset + c];
              }
            }
          });
          offset += pc;
        }
        break;
      }
      case Op::ConcatRows: {
        std::size_t offset = 0;
        for (NodeId p : nd.parents) {
          const Tensor& vp = nodes_[p].value;
          accum(p, [&](Tensor& dst) {
            for (std::size_t i = 0; i < vp.size(); ++i) dst[i] += g[offset + i];
          });
          offset += vp.size();
        }
        break;
      }
      case Op::Patchify: {
        const Tensor& vs = nodes_[nd.parents[0]].value;
        std::size_t t_len = vs.cols();
        accum(nd.parents[0], [&](Tensor& dst) {
          double* drow = dst.data() + nd.channel * t_len;
          std::size_t n_patches = nd.value.rows();
          for (std::size_t j = 0; j < n_patches; ++j) {
            for (std::size_t t = 0; t < nd.patch_len; ++t) {
              drow[j * nd.stride + t] += g[j * nd.patch_len + t];
            }
          }
        });
        break;
      }
    }
    grads[id] = Tensor();  // consumed
  }
  return out;
}

double max_rel_err_vs_fd(const std::function<double(const Tensor&)>& f, const Tensor& x,
                         const Tensor& analytic, double eps) {
  if (!analytic.same_shape(x)) {
    throw Error("max_rel_err_vs_fd: gradient shape " + analytic.shape_str() +
                " does not match input " + x.shape_str());
  }
  Tensor probe = x;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double orig = probe[i];
    probe[i] = orig + eps;
    double hi = f(probe);
    probe[i] = orig - eps;
    double lo = f(probe);
    probe[i] = orig;
    double cd = (hi - lo) / (2.0 * eps);
    double a = analytic[i];
    double rel = std::abs(a - cd) / (std::abs(a) + std::abs(cd) + 1e-12);
    worst = std::max(worst, rel);
  }
  return worst;
}

double grad_check(const std::function<NodeId(Graph&, NodeId)>& build, const Tensor& x,
                  double eps) {
  Graph g;
  NodeId in = g.input(x);
  NodeId loss = build(g, in);
  GradientMap grads = g.backward(loss);
  Tensor analytic = grads.at(in);
  auto f = [&](const Tensor& probe) {
    Graph fg;
    NodeId fin = fg.input(probe);
    NodeId floss = build(fg, fin);
    return fg.value(floss).scalar_value();
  };
  return max_rel_err_vs_fd(f, x, analytic, eps);
}

}  // namespace tshint
