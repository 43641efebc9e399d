#include "sherlock/optimizer.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "binary_io.hpp"
#include "sherlock/errors.hpp"

namespace sherlock {

namespace {

constexpr std::string_view kAdamMagic = "SHLA";
constexpr std::uint16_t kAdamVersion = 1;

std::vector<Tensor*> tensor_ptrs(ModelParams& p) {
  std::vector<Tensor*> out;
  p.for_each([&](std::string_view, Tensor& t) { out.push_back(&t); });
  return out;
}

std::vector<const Tensor*> tensor_ptrs(const ModelParams& p) {
  std::vector<const Tensor*> out;
  p.for_each([&](std::string_view, const Tensor& t) { out.push_back(&t); });
  return out;
}

std::vector<std::string> tensor_names(const ModelParams& p) {
  std::vector<std::string> out;
  p.for_each([&](std::string_view name, const Tensor&) { out.emplace_back(name); });
  return out;
}

}  // namespace

AdamState AdamState::for_params(const std::vector<Tensor>& params) {
  AdamState s;
  for (const auto& t : params) {
    s.first_moment.emplace_back(t.shape());
    s.second_moment.emplace_back(t.shape());
  }
  return s;
}

AdamState AdamState::for_params(const ModelParams& params) {
  AdamState s;
  params.for_each([&](std::string_view, const Tensor& t) {
    s.first_moment.emplace_back(t.shape());
    s.second_moment.emplace_back(t.shape());
  });
  return s;
}

void adam_step(std::vector<Tensor*> params, const std::vector<const Tensor*>& grads,
               AdamState& state, double lr, const std::vector<std::string>& names) {
  auto label = [&](std::size_t i) {
    return i < names.size() ? names[i] : "tensor #" + std::to_string(i);
  };
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                     std::to_string(grads.size()) + " gradients, " +
                     std::to_string(state.first_moment.size()) + " moment tensors");
  }
  // Validate everything before mutating anything.
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& shape = params[i]->shape();
    if (grads[i]->shape() != shape || state.first_moment[i].shape() != shape ||
        state.second_moment[i].shape() != shape) {
      throw ShapeError("adam_step: shape mismatch for " + label(i) + ": parameter " +
                       shape_to_string(shape) + ", gradient " +
                       shape_to_string(grads[i]->shape()));
    }
    if (!grads[i]->all_finite()) throw NonFiniteError("non-finite gradient in " + label(i));
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(AdamState::kBeta1, t);
  const double correction2 = 1.0 - std::pow(AdamState::kBeta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params[i]->data();
    const auto g = grads[i]->data();
    auto m = state.first_moment[i].data();
    auto v = state.second_moment[i].data();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = AdamState::kBeta1 * m[j] + (1.0 - AdamState::kBeta1) * g[j];
      v[j] = AdamState::kBeta2 * v[j] + (1.0 - AdamState::kBeta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      theta[j] -= lr * m_hat / (std::sqrt(v_hat) + AdamState::kEpsilon);
    }
  }
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr) {
  adam_step(tensor_ptrs(params), tensor_ptrs(grads), state, lr, tensor_names(params));
}

void write_adam_state(std::ostream& out, const AdamState& state) {
  detail::ByteWriter w;
  w.bytes(kAdamMagic);
  w.u16(kAdamVersion);
  w.u64(state.step);
  w.u32(static_cast<std::uint32_t>(state.first_moment.size()));
  for (std::size_t i = 0; i < state.first_moment.size(); ++i) {
    for (const Tensor* t : {&state.first_moment[i], &state.second_moment[i]}) {
      w.u32(static_cast<std::uint32_t>(t->rank()));
      for (auto d : t->shape()) w.u64(d);
      for (double v : t->data()) w.f64(v);
    }
  }
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
}

AdamState read_adam_state(std::istream& in) {
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  detail::ByteReader r(buf.data(), buf.size());
  if (buf.size() < kAdamMagic.size() || r.bytes(kAdamMagic.size()) != kAdamMagic) {
    throw NotAModelFileError("not an optimizer state file");
  }
  if (const auto v = r.u16(); v != kAdamVersion) {
    throw VersionMismatchError("optimizer state version " + std::to_string(v) +
                               ", expected " + std::to_string(kAdamVersion));
  }
  AdamState s;
  s.step = r.u64();
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    for (auto* list : {&s.first_moment, &s.second_moment}) {
      Shape shape(r.u32());
      for (auto& d : shape) d = r.u64();
      if (shape_size(shape) > r.remaining() / 8) {
        throw TruncatedFileError("optimizer tensor larger than the remaining file");
      }
      Tensor t(shape);
      for (auto& v : t.data()) v = r.f64();
      list->push_back(std::move(t));
    }
  }
  return s;
}

void save_adam_state(const AdamState& state, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_adam_state(out, state);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

AdamState load_adam_state(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_adam_state(in);
}

}  // namespace sherlock
