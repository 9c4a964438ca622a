#include "vesselnet/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "vesselnet/io.hpp"

namespace vesselnet::nn {

namespace {

constexpr const char* kMagic = "VNCK 1";

std::string shape_token(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(s[i]);
  }
  return out;
}

Shape parse_shape(const std::string& token) {
  Shape s;
  std::stringstream ss(token);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    if (part.empty()) throw FormatError("checkpoint: malformed shape '" + token + "'");
    s.push_back(std::stoull(part));
  }
  if (s.empty()) throw FormatError("checkpoint: empty shape");
  return s;
}

}  // namespace

const std::string* Checkpoint::meta_value(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return &v;
  }
  return nullptr;
}

Checkpoint snapshot(const ParameterSet<float>& params, std::vector<std::pair<std::string, std::string>> meta) {
  Checkpoint c;
  c.meta = std::move(meta);
  for (const auto& e : params.entries()) {
    c.tensors.push_back({e.name, e.tensor.shape(), e.trainable,
                         std::vector<float>(e.tensor.data().begin(), e.tensor.data().end())});
  }
  return c;
}

void restore(const Checkpoint& checkpoint, ParameterSet<float>& params) {
  if (checkpoint.tensors.size() != params.size()) {
    throw FormatError("checkpoint: holds " + std::to_string(checkpoint.tensors.size()) +
                      " tensors, model has " + std::to_string(params.size()));
  }
  for (const auto& ct : checkpoint.tensors) {
    const auto* e = params.find(ct.name);
    if (!e) throw FormatError("checkpoint: model has no tensor named '" + ct.name + "'");
    if (e->tensor.shape() != ct.shape) {
      throw FormatError("checkpoint: tensor '" + ct.name + "' has shape " + shape_string(ct.shape) +
                        ", model expects " + shape_string(e->tensor.shape()));
    }
    auto dst = Tensor<float>(e->tensor).data();
    std::copy(ct.values.begin(), ct.values.end(), dst.begin());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::ostringstream manifest;
  manifest << kMagic << '\n';
  for (const auto& [k, v] : checkpoint.meta) {
    if (k.empty() || k.find_first_of(" \t\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw std::invalid_argument("checkpoint: meta key '" + k + "' or its value is not writable");
    }
    manifest << "meta " << k << ' ' << v << '\n';
  }
  std::size_t offset = 0;
  for (const auto& t : checkpoint.tensors) {
    const std::size_t bytes = t.values.size() * sizeof(float);
    manifest << "tensor " << t.name << ' ' << (t.trainable ? 1 : 0) << ' ' << shape_token(t.shape) << ' '
             << offset << ' ' << bytes << '\n';
    offset += bytes;
  }
  manifest << "end\n";

  std::string blob = manifest.str();
  blob.reserve(blob.size() + offset);
  for (const auto& t : checkpoint.tensors) {
    for (float v : t.values) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
      char b[4];
      for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
      blob.append(b, 4);
    }
  }
  write_file_atomic(path, blob);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string blob = read_file(path);
  std::size_t pos = 0;
  auto next_line = [&]() {
    const auto nl = blob.find('\n', pos);
    if (nl == std::string::npos) throw FormatError("checkpoint: manifest of '" + path + "' is truncated");
    std::string line = blob.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  if (next_line() != kMagic) throw FormatError("checkpoint: '" + path + "' is not a VNCK 1 file");

  Checkpoint c;
  struct Pending {
    std::size_t offset, bytes;
  };
  std::vector<Pending> locs;
  for (;;) {
    const std::string line = next_line();
    if (line == "end") break;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      c.meta.emplace_back(key, value);
    } else if (kind == "tensor") {
      CheckpointTensor t;
      int trainable = 0;
      std::string shape;
      Pending p{};
      if (!(ls >> t.name >> trainable >> shape >> p.offset >> p.bytes)) {
        throw FormatError("checkpoint: malformed tensor line '" + line + "'");
      }
      t.trainable = trainable != 0;
      t.shape = parse_shape(shape);
      if (p.bytes != shape_volume(t.shape) * sizeof(float)) {
        throw FormatError("checkpoint: tensor '" + t.name + "' byte count disagrees with its shape");
      }
      c.tensors.push_back(std::move(t));
      locs.push_back(p);
    } else {
      throw FormatError("checkpoint: unknown manifest line '" + line + "'");
    }
  }
  const std::size_t payload = pos;
  for (std::size_t i = 0; i < c.tensors.size(); ++i) {
    const auto [offset, bytes] = locs[i];
    if (payload + offset + bytes > blob.size()) {
      throw FormatError("checkpoint: payload of tensor '" + c.tensors[i].name + "' is truncated");
    }
    auto& values = c.tensors[i].values;
    values.resize(bytes / 4);
    const auto* src = reinterpret_cast<const unsigned char*>(blob.data() + payload + offset);
    for (std::size_t j = 0; j < values.size(); ++j) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(src[4 * j + b]) << (8 * b);
      values[j] = std::bit_cast<float>(bits);
    }
  }
  return c;
}

}  // namespace vesselnet::nn
