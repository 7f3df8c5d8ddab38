#include "seld/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include "seld/binary.hpp"

namespace seld::nn {

namespace {

std::vector<std::pair<std::string, double>> config_fields(const NetworkConfig& c) {
  std::vector<std::pair<std::string, double>> f = {
      {"input_channels", c.input_channels}, {"input_bins", c.input_bins},
      {"filters", c.filters},               {"ratio", c.ratio},
      {"num_classes", c.num_classes},       {"rnn_units", c.rnn_units},
      {"rnn_layers", c.rnn_layers},         {"fc_units", c.fc_units},
      {"merge", c.merge == MergeOp::Max ? 1.0 : 0.0},
      {"use_scse", c.use_scse ? 1.0 : 0.0},
      {"seed", static_cast<double>(c.seed)},
  };
  for (int i = 0; i < NetworkConfig::kBlocks; ++i) {
    f.emplace_back("time_pool" + std::to_string(i), c.time_pools[i]);
    f.emplace_back("freq_pool" + std::to_string(i), c.freq_pools[i]);
  }
  return f;
}

NetworkConfig config_from_fields(const std::map<std::string, double>& m) {
  auto get = [&](const std::string& k) -> double {
    auto it = m.find(k);
    if (it == m.end()) throw std::runtime_error("checkpoint config lacks key '" + k + "'");
    return it->second;
  };
  NetworkConfig c;
  c.input_channels = static_cast<int>(get("input_channels"));
  c.input_bins = static_cast<int>(get("input_bins"));
  c.filters = static_cast<int>(get("filters"));
  c.ratio = static_cast<int>(get("ratio"));
  c.num_classes = static_cast<int>(get("num_classes"));
  c.rnn_units = static_cast<int>(get("rnn_units"));
  c.rnn_layers = static_cast<int>(get("rnn_layers"));
  c.fc_units = static_cast<int>(get("fc_units"));
  c.merge = get("merge") != 0.0 ? MergeOp::Max : MergeOp::Add;
  c.use_scse = get("use_scse") != 0.0;
  c.seed = static_cast<std::uint64_t>(get("seed"));
  for (int i = 0; i < NetworkConfig::kBlocks; ++i) {
    c.time_pools[i] = static_cast<int>(get("time_pool" + std::to_string(i)));
    c.freq_pools[i] = static_cast<int>(get("freq_pool" + std::to_string(i)));
  }
  return c;
}

std::string describe_mismatch(const NetworkConfig& a, const NetworkConfig& b) {
  const auto fa = config_fields(a), fb = config_fields(b);
  std::string out;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    if (fa[i].first == "seed" || fa[i].second == fb[i].second) continue;
    if (!out.empty()) out += ", ";
    out += fa[i].first + " " + std::to_string(static_cast<long long>(fa[i].second)) + " vs " +
           std::to_string(static_cast<long long>(fb[i].second));
  }
  return out;
}

template <typename T, typename A>
NamedTensor to_named(const std::string& name, const std::vector<int>& shape, const std::vector<T, A>& v) {
  NamedTensor t;
  t.name = name;
  for (int d : shape) t.dims.push_back(static_cast<std::uint32_t>(d));
  t.data.assign(v.begin(), v.end());
  return t;
}

template <typename T, typename A>
void copy_into(const NamedTensor& src, const std::vector<int>& shape, std::vector<T, A>& dst) {
  bool ok = src.dims.size() == shape.size() && src.data.size() == dst.size();
  for (std::size_t i = 0; ok && i < shape.size(); ++i) ok = src.dims[i] == static_cast<std::uint32_t>(shape[i]);
  if (!ok) throw std::runtime_error("checkpoint tensor '" + src.name + "' has the wrong shape");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(src.data[i]);
}

const NamedTensor& require(const Checkpoint& c, const std::string& name) {
  const NamedTensor* t = c.find(name);
  if (!t) throw std::runtime_error("checkpoint lacks tensor '" + name + "'");
  return *t;
}

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const NamedTensor& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
  BinaryWriter w(os);
  w.bytes(kCheckpointMagic, 8);
  const auto fields = config_fields(ckpt.config);
  w.u32(static_cast<std::uint32_t>(fields.size()));
  for (const auto& [k, v] : fields) {
    w.str(k);
    w.f64(v);
  }
  w.u64(ckpt.optimizer_steps);
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const NamedTensor& t : ckpt.tensors) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.dims.size()));
    for (std::uint32_t d : t.dims) w.u32(d);
    w.f64_array(t.data);
  }
  if (!os) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
  BinaryReader r(is);
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0) throw std::runtime_error(path.string() + " is not a checkpoint");
  Checkpoint c;
  std::map<std::string, double> fields;
  const std::uint32_t n_cfg = r.u32();
  for (std::uint32_t i = 0; i < n_cfg; ++i) {
    std::string k = r.str();
    fields[k] = r.f64();
  }
  c.config = config_from_fields(fields);
  c.optimizer_steps = r.u64();
  const std::uint32_t n_t = r.u32();
  for (std::uint32_t i = 0; i < n_t; ++i) {
    NamedTensor t;
    t.name = r.str();
    const std::uint32_t nd = r.u32();
    if (nd > 8) throw std::runtime_error("checkpoint tensor '" + t.name + "' has too many dimensions");
    std::size_t count = 1;
    for (std::uint32_t d = 0; d < nd; ++d) {
      t.dims.push_back(r.u32());
      count *= t.dims.back();
    }
    if (count > (std::size_t{1} << 30)) throw std::runtime_error("checkpoint tensor '" + t.name + "' is too large");
    t.data.resize(count);
    r.f64_array(t.data);
    c.tensors.push_back(std::move(t));
  }
  return c;
}

template <typename T>
Checkpoint make_checkpoint(SeldNet<T>& net, const Adam<T>* adam, const FeatureStats* norm) {
  Checkpoint c;
  c.config = net.config();
  for (Param<T>* p : net.parameters()) c.tensors.push_back(to_named(p->name, p->shape, p->value));
  if (adam) {
    c.optimizer_steps = static_cast<std::uint64_t>(adam->steps());
    for (const auto& s : adam->slots()) {
      c.tensors.push_back(to_named("adam.m:" + s.param->name, s.param->shape, s.m));
      c.tensors.push_back(to_named("adam.v:" + s.param->name, s.param->shape, s.v));
    }
  }
  if (norm) {
    const std::vector<int> shape{static_cast<int>(norm->mean.size())};
    c.tensors.push_back(to_named("input_norm.mean", shape, norm->mean));
    c.tensors.push_back(to_named("input_norm.std", shape, norm->stddev));
  }
  return c;
}

template <typename T>
void restore_network(const Checkpoint& ckpt, SeldNet<T>& net) {
  if (!(ckpt.config == net.config())) {
    std::string diff = describe_mismatch(ckpt.config, net.config());
    if (!diff.empty()) throw std::runtime_error("checkpoint/config mismatch: " + diff);
  }
  for (Param<T>* p : net.parameters()) copy_into(require(ckpt, p->name), p->shape, p->value);
}

template <typename T>
void restore_optimizer(const Checkpoint& ckpt, Adam<T>& adam) {
  for (auto& s : adam.slots()) {
    copy_into(require(ckpt, "adam.m:" + s.param->name), s.param->shape, s.m);
    copy_into(require(ckpt, "adam.v:" + s.param->name), s.param->shape, s.v);
  }
  adam.set_steps(static_cast<long>(ckpt.optimizer_steps));
}

std::optional<FeatureStats> checkpoint_feature_stats(const Checkpoint& ckpt) {
  const NamedTensor* m = ckpt.find("input_norm.mean");
  const NamedTensor* s = ckpt.find("input_norm.std");
  if (!m || !s) return std::nullopt;
  if (m->data.size() != s->data.size()) throw std::runtime_error("checkpoint input_norm tensors disagree in size");
  return FeatureStats{m->data, s->data};
}

template Checkpoint make_checkpoint<float>(SeldNet<float>&, const Adam<float>*, const FeatureStats*);
template Checkpoint make_checkpoint<double>(SeldNet<double>&, const Adam<double>*, const FeatureStats*);
template void restore_network<float>(const Checkpoint&, SeldNet<float>&);
template void restore_network<double>(const Checkpoint&, SeldNet<double>&);
template void restore_optimizer<float>(const Checkpoint&, Adam<float>&);
template void restore_optimizer<double>(const Checkpoint&, Adam<double>&);

}  // namespace seld::nn
