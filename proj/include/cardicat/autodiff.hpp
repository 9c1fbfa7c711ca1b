// Reverse-mode tape over matrices. A tape is built per training step, run
// forward as ops are recorded, and swept backward exactly once; parameter
// gradients accumulate into their ParamStore buffers.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cardicat/errors.hpp"
#include "cardicat/matrix.hpp"
#include "cardicat/params.hpp"

namespace cardicat {

template <typename T>
class Tape {
public:
    struct Var {
        std::size_t id = static_cast<std::size_t>(-1);
        bool valid() const { return id != static_cast<std::size_t>(-1); }
    };

    Var constant(Matrix<T> v) { return push(std::move(v), nullptr, nullptr); }

    // Leaf bound to a parameter; repeated registration returns the same node
    // so every use shares one gradient accumulator.
    Var param(Parameter<T>& p) {
        auto it = param_vars_.find(&p);
        if (it != param_vars_.end()) return it->second;
        Var v = push(p.value, nullptr, &p);
        param_vars_.emplace(&p, v);
        return v;
    }

    const Matrix<T>& value(Var v) const { return nodes_[v.id].value; }
    const Matrix<T>& grad(Var v) const { return nodes_[v.id].grad; }

    Var matmul(Var xa, Var xb) {
        const Matrix<T>& a = nodes_[xa.id].value;
        const Matrix<T>& b = nodes_[xb.id].value;
        Matrix<T> y = cardicat::matmul(a, b);
        return push(std::move(y), [xa, xb](Tape& t, std::size_t self) {
            const Matrix<T>& g = t.nodes_[self].grad;
            add_matmul_nt(t.nodes_[xa.id].grad, g, t.nodes_[xb.id].value);
            add_matmul_tn(t.nodes_[xb.id].grad, t.nodes_[xa.id].value, g);
        });
    }

    // Adds a 1 x m row vector to every row.
    Var add_bias(Var x, Var bias) {
        const Matrix<T>& a = nodes_[x.id].value;
        const Matrix<T>& b = nodes_[bias.id].value;
        require_shape(b.rows == 1 && b.cols == a.cols, "add_bias");
        Matrix<T> y = a;
        for (std::size_t i = 0; i < y.rows; ++i)
            for (std::size_t j = 0; j < y.cols; ++j) y(i, j) += b(0, j);
        return push(std::move(y), [x, bias](Tape& t, std::size_t self) {
            const Matrix<T>& g = t.nodes_[self].grad;
            Matrix<T>& gx = t.nodes_[x.id].grad;
            Matrix<T>& gb = t.nodes_[bias.id].grad;
            for (std::size_t i = 0; i < g.rows; ++i)
                for (std::size_t j = 0; j < g.cols; ++j) {
                    gx(i, j) += g(i, j);
                    gb(0, j) += g(i, j);
                }
        });
    }

    Var add(Var xa, Var xb) {
        return elementwise2(xa, xb, [](T a, T b) { return a + b; },
                            [](Tape& t, std::size_t self, Var a, Var b) {
                                const Matrix<T>& g = t.nodes_[self].grad;
                                accumulate(t.nodes_[a.id].grad, g);
                                accumulate(t.nodes_[b.id].grad, g);
                            });
    }

    Var sub(Var xa, Var xb) {
        return elementwise2(xa, xb, [](T a, T b) { return a - b; },
                            [](Tape& t, std::size_t self, Var a, Var b) {
                                const Matrix<T>& g = t.nodes_[self].grad;
                                accumulate(t.nodes_[a.id].grad, g);
                                Matrix<T>& gb = t.nodes_[b.id].grad;
                                for (std::size_t i = 0; i < g.size(); ++i) gb.data[i] -= g.data[i];
                            });
    }

    Var mul(Var xa, Var xb) {
        return elementwise2(xa, xb, [](T a, T b) { return a * b; },
                            [](Tape& t, std::size_t self, Var a, Var b) {
                                const Matrix<T>& g = t.nodes_[self].grad;
                                const Matrix<T>& av = t.nodes_[a.id].value;
                                const Matrix<T>& bv = t.nodes_[b.id].value;
                                Matrix<T>& ga = t.nodes_[a.id].grad;
                                Matrix<T>& gb = t.nodes_[b.id].grad;
                                for (std::size_t i = 0; i < g.size(); ++i) {
                                    ga.data[i] += g.data[i] * bv.data[i];
                                    gb.data[i] += g.data[i] * av.data[i];
                                }
                            });
    }

    // Subgradient 0 at exactly 0.
    Var relu(Var x) {
        Matrix<T> y = nodes_[x.id].value;
        for (T& v : y.data) v = v > T{0} ? v : T{0};
        return push(std::move(y), [x](Tape& t, std::size_t self) {
            const Matrix<T>& g = t.nodes_[self].grad;
            const Matrix<T>& in = t.nodes_[x.id].value;
            Matrix<T>& gx = t.nodes_[x.id].grad;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (in.data[i] > T{0}) gx.data[i] += g.data[i];
        });
    }

    Var tanh(Var x) {
        Matrix<T> y = nodes_[x.id].value;
        for (T& v : y.data) v = std::tanh(v);
        return push(std::move(y), [x](Tape& t, std::size_t self) {
            const Matrix<T>& g = t.nodes_[self].grad;
            const Matrix<T>& out = t.nodes_[self].value;
            Matrix<T>& gx = t.nodes_[x.id].grad;
            for (std::size_t i = 0; i < g.size(); ++i)
                gx.data[i] += g.data[i] * (T{1} - out.data[i] * out.data[i]);
        });
    }

    Var exp(Var x) {
        Matrix<T> y = nodes_[x.id].value;
        for (T& v : y.data) v = std::exp(v);
        return push(std::move(y), [x](Tape& t, std::size_t self) {
            const Matrix<T>& g = t.nodes_[self].grad;
            const Matrix<T>& out = t.nodes_[self].value;
            Matrix<T>& gx = t.nodes_[x.id].grad;
            for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i] * out.data[i];
        });
    }

    Var scale(Var x, T k) {
        Matrix<T> y = nodes_[x.id].value;
        for (T& v : y.data) v *= k;
        return push(std::move(y), [x, k](Tape& t, std::size_t self) {
            const Matrix<T>& g = t.nodes_[self].grad;
            Matrix<T>& gx = t.nodes_[x.id].grad;
            for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i] * k;
        });
    }

    Var add_scalar(Var x, T k) {
        Matrix<T> y = nodes_[x.id].value;
        for (T& v : y.data) v += k;
        return push(std::move(y), [x](Tape& t, std::size_t self) {
            accumulate(t.nodes_[x.id].grad, t.nodes_[self].grad);
        });
    }

    Var concat_cols(const std::vector<Var>& xs) {
        if (xs.empty()) throw std::invalid_argument("concat_cols: empty input");
        const std::size_t n = nodes_[xs[0].id].value.rows;
        std::size_t total = 0;
        for (Var v : xs) {
            require_shape(nodes_[v.id].value.rows == n, "concat_cols");
            total += nodes_[v.id].value.cols;
        }
        Matrix<T> y(n, total);
        std::size_t off = 0;
        for (Var v : xs) {
            const Matrix<T>& a = nodes_[v.id].value;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < a.cols; ++j) y(i, off + j) = a(i, j);
            off += a.cols;
        }
        std::vector<Var> inputs = xs;
        return push(std::move(y), [inputs](Tape& t, std::size_t self) {
            const Matrix<T>& g = t.nodes_[self].grad;
            std::size_t off = 0;
            for (Var v : inputs) {
                Matrix<T>& gx = t.nodes_[v.id].grad;
                for (std::size_t i = 0; i < gx.rows; ++i)
                    for (std::size_t j = 0; j < gx.cols; ++j) gx(i, j) += g(i, off + j);
                off += gx.cols;
            }
        });
    }

    // Row lookup: output row i is table row idx[i]. Gradients scatter-add
    // back into the table, so a table used both as encoder input and as
    // reconstruction target receives both contributions.
    Var gather_rows(Var table, std::vector<std::int32_t> idx) {
        const Matrix<T>& tbl = nodes_[table.id].value;
        Matrix<T> y(idx.size(), tbl.cols);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const std::int32_t r = idx[i];
            if (r < 0 || static_cast<std::size_t>(r) >= tbl.rows)
                throw DataError("gather_rows: code " + std::to_string(r) + " out of range [0, " +
                                std::to_string(tbl.rows) + ")");
            for (std::size_t j = 0; j < tbl.cols; ++j) y(i, j) = tbl(static_cast<std::size_t>(r), j);
        }
        return push(std::move(y), [table, idx = std::move(idx)](Tape& t, std::size_t self) {
            const Matrix<T>& g = t.nodes_[self].grad;
            Matrix<T>& gt = t.nodes_[table.id].grad;
            for (std::size_t i = 0; i < idx.size(); ++i) {
                const auto r = static_cast<std::size_t>(idx[i]);
                for (std::size_t j = 0; j < g.cols; ++j) gt(r, j) += g(i, j);
            }
        });
    }

    // Mean over rows of -log softmax(logits)[label]; max-subtracted softmax.
    Var softmax_cross_entropy(Var logits, std::vector<std::int32_t> labels) {
        const Matrix<T>& l = nodes_[logits.id].value;
        require_shape(labels.size() == l.rows, "softmax_cross_entropy");
        Matrix<T> probs(l.rows, l.cols);
        T loss{0};
        for (std::size_t i = 0; i < l.rows; ++i) {
            const std::int32_t label = labels[i];
            if (label < 0 || static_cast<std::size_t>(label) >= l.cols)
                throw DataError("softmax_cross_entropy: label out of range");
            T mx = l(i, 0);
            for (std::size_t j = 1; j < l.cols; ++j) mx = std::max(mx, l(i, j));
            T sum{0};
            for (std::size_t j = 0; j < l.cols; ++j) {
                probs(i, j) = std::exp(l(i, j) - mx);
                sum += probs(i, j);
            }
            for (std::size_t j = 0; j < l.cols; ++j) probs(i, j) /= sum;
            loss += std::log(sum) + mx - l(i, static_cast<std::size_t>(label));
        }
        const T inv_n = T{1} / static_cast<T>(l.rows);
        Matrix<T> y(1, 1);
        y(0, 0) = loss * inv_n;
        return push(std::move(y), [logits, labels = std::move(labels), probs = std::move(probs),
                                   inv_n](Tape& t, std::size_t self) {
            const T g = t.nodes_[self].grad(0, 0) * inv_n;
            Matrix<T>& gx = t.nodes_[logits.id].grad;
            for (std::size_t i = 0; i < gx.rows; ++i) {
                for (std::size_t j = 0; j < gx.cols; ++j) gx(i, j) += g * probs(i, j);
                gx(i, static_cast<std::size_t>(labels[i])) -= g;
            }
        });
    }

    // Row-wise max-subtracted softmax. Backward applies the softmax
    // Jacobian per row: dx_j = p_j * (g_j - sum_k g_k p_k).
    Var softmax_rows(Var logits) {
        const Matrix<T>& l = nodes_[logits.id].value;
        Matrix<T> y(l.rows, l.cols);
        for (std::size_t i = 0; i < l.rows; ++i) {
            T mx = l(i, 0);
            for (std::size_t j = 1; j < l.cols; ++j) mx = std::max(mx, l(i, j));
            T sum{0};
            for (std::size_t j = 0; j < l.cols; ++j) {
                y(i, j) = std::exp(l(i, j) - mx);
                sum += y(i, j);
            }
            for (std::size_t j = 0; j < l.cols; ++j) y(i, j) /= sum;
        }
        return push(std::move(y), [logits](Tape& t, std::size_t self) {
            const Matrix<T>& g = t.nodes_[self].grad;
            const Matrix<T>& p = t.nodes_[self].value;
            Matrix<T>& gx = t.nodes_[logits.id].grad;
            for (std::size_t i = 0; i < g.rows; ++i) {
                T dot{0};
                for (std::size_t j = 0; j < g.cols; ++j) dot += g(i, j) * p(i, j);
                for (std::size_t j = 0; j < g.cols; ++j) gx(i, j) += p(i, j) * (g(i, j) - dot);
            }
        });
    }

    Var sum_all(Var x) {
        const Matrix<T>& a = nodes_[x.id].value;
        T s{0};
        for (T v : a.data) s += v;
        Matrix<T> y(1, 1);
        y(0, 0) = s;
        return push(std::move(y), [x](Tape& t, std::size_t self) {
            const T g = t.nodes_[self].grad(0, 0);
            Matrix<T>& gx = t.nodes_[x.id].grad;
            for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] += g;
        });
    }

    // Mean over columns of the population variance of each column. For an
    // embedding table this is the total coordinate-wise variance statistic.
    Var column_variance_mean(Var x) {
        const Matrix<T>& a = nodes_[x.id].value;
        std::vector<T> means;
        const T inv_r = T{1} / static_cast<T>(a.rows);
        Matrix<T> y(1, 1);
        y(0, 0) = cardicat::column_variance_mean(a, &means);
        return push(std::move(y), [x, means = std::move(means), inv_r](Tape& t, std::size_t self) {
            const Matrix<T>& a = t.nodes_[x.id].value;
            const T g = t.nodes_[self].grad(0, 0);
            const T k = T{2} * inv_r / static_cast<T>(a.cols);
            Matrix<T>& gx = t.nodes_[x.id].grad;
            for (std::size_t i = 0; i < a.rows; ++i)
                for (std::size_t j = 0; j < a.cols; ++j)
                    gx(i, j) += g * k * (a(i, j) - means[j]);
        });
    }

    // Seeds d(loss)/d(loss) = 1, sweeps the tape in reverse and flushes
    // parameter gradients. A tape may be swept only once; the parameters it
    // captured may have changed after an optimizer step.
    void backward(Var loss) {
        if (swept_) throw std::logic_error("Tape::backward: tape already swept");
        swept_ = true;
        const Matrix<T>& lv = nodes_[loss.id].value;
        require_shape(lv.rows == 1 && lv.cols == 1, "backward: loss must be scalar");
        for (auto& n : nodes_) n.grad = Matrix<T>(n.value.rows, n.value.cols);
        nodes_[loss.id].grad(0, 0) = T{1};
        for (std::size_t i = nodes_.size(); i-- > 0;)
            if (nodes_[i].pull) nodes_[i].pull(*this, i);
        for (auto& [p, var] : param_vars_) accumulate(p->grad, nodes_[var.id].grad);
    }

private:
    struct Node {
        Matrix<T> value;
        Matrix<T> grad;
        std::function<void(Tape&, std::size_t)> pull;
    };

    static void accumulate(Matrix<T>& dst, const Matrix<T>& src) {
        for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
    }

    Var push(Matrix<T> value, std::function<void(Tape&, std::size_t)> pull,
             Parameter<T>* p = nullptr) {
        (void)p;
        nodes_.push_back(Node{std::move(value), Matrix<T>{}, std::move(pull)});
        return Var{nodes_.size() - 1};
    }

    template <typename FwdFn, typename BwdFn>
    Var elementwise2(Var xa, Var xb, FwdFn fwd, BwdFn bwd) {
        const Matrix<T>& a = nodes_[xa.id].value;
        const Matrix<T>& b = nodes_[xb.id].value;
        require_shape(a.same_shape(b), "elementwise");
        Matrix<T> y(a.rows, a.cols);
        for (std::size_t i = 0; i < y.size(); ++i) y.data[i] = fwd(a.data[i], b.data[i]);
        return push(std::move(y), [xa, xb, bwd](Tape& t, std::size_t self) { bwd(t, self, xa, xb); });
    }

    std::vector<Node> nodes_;
    std::unordered_map<Parameter<T>*, Var> param_vars_;
    bool swept_ = false;
};

}  // namespace cardicat
