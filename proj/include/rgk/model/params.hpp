#pragma once

// Named trainable tensors. Initialization draws from a stream keyed by the
// parameter name, so adding a parameter never reshuffles the others.

#include <map>

#include "rgk/core/rng.hpp"
#include "rgk/io/container.hpp"
#include "rgk/numerics/tensor.hpp"

namespace rgk {

class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  Tensor zeros(const std::string& name, Shape shape) { return insert(name, Tensor::zeros(std::move(shape), true)); }

  Tensor constant(const std::string& name, Shape shape, double v) {
    return insert(name, Tensor::full(std::move(shape), v, true));
  }

  // Uniform in +-gain * sqrt(6 / (fan_in + fan_out)).
  Tensor xavier(const std::string& name, Shape shape, std::size_t fan_in, std::size_t fan_out, double gain = 1.0) {
    Rng rng(stream_seed(seed_, name));
    double a = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-a, a);
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = u(rng);
    return insert(name, Tensor(std::move(shape), std::move(v), true));
  }

  Tensor normal(const std::string& name, Shape shape, double stddev) {
    Rng rng(stream_seed(seed_, name));
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = stddev * standard_normal(rng);
    return insert(name, Tensor(std::move(shape), std::move(v), true));
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  const Tensor& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("unknown parameter '" + name + "'");
    return tensors_[it->second];
  }

  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  std::size_t size() const { return tensors_.size(); }

  std::size_t numel() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.numel();
    return n;
  }

  std::vector<Tensor> with_prefix(const std::string& prefix) const {
    std::vector<Tensor> out;
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i].rfind(prefix, 0) == 0) out.push_back(tensors_[i]);
    return out;
  }

  // Deep copy with independent storage.
  ParamStore clone() const {
    ParamStore c(seed_);
    for (std::size_t i = 0; i < names_.size(); ++i)
      c.insert(names_[i], Tensor(tensors_[i].shape(), tensors_[i].values(), tensors_[i].requires_grad()));
    return c;
  }

  // Rounds every value to float precision (the checkpoint storage format).
  void quantize_f32() {
    for (auto& t : tensors_)
      for (auto& x : t.mutable_values()) {
        // volatile: GCC 11 at -O3 folded a plain double-float-double round trip.
        volatile float f = static_cast<float>(x);
        x = f;
      }
  }

  void zero_grad() {
    for (auto& t : tensors_) t.zero_grad();
  }

  void store(Container& c) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      std::vector<std::uint64_t> dims(tensors_[i].shape().begin(), tensors_[i].shape().end());
      c.put(names_[i], std::move(dims), tensors_[i].values());
    }
  }

  // Copies entries whose names start with prefix. With require_all, every
  // parameter under the prefix must be present in the container.
  std::size_t load(const Container& c, const std::string& prefix = "", bool require_all = true) {
    std::size_t copied = 0;
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i].rfind(prefix, 0) != 0) continue;
      if (!c.has(names_[i])) {
        if (require_all) throw DataError("checkpoint lacks parameter '" + names_[i] + "'");
        continue;
      }
      const auto& e = c.get(names_[i]);
      Shape shape(e.dims.begin(), e.dims.end());
      if (shape != tensors_[i].shape())
        throw DataError(detail::concat("parameter '", names_[i], "' has shape ", shape_str(shape), " in checkpoint, expected ",
                                       shape_str(tensors_[i].shape())));
      auto& v = tensors_[i].mutable_values();
      for (std::size_t k = 0; k < v.size(); ++k) v[k] = e.data[k];
      ++copied;
    }
    return copied;
  }

 private:
  Tensor insert(const std::string& name, Tensor t) {
    if (has(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
    index_[name] = tensors_.size();
    names_.push_back(name);
    tensors_.push_back(std::move(t));
    return tensors_.back();
  }

  std::uint64_t seed_;
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace rgk
