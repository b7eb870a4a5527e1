#include "macrpo/nn/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <system_error>
#include <unordered_map>

#include "macrpo/errors.hpp"

namespace macrpo::nn {
namespace {

void write_values(std::ostream& os, const char* tag, const Tensor2& t) {
  os << tag;
  for (double v : t.values) os << ' ' << format_double(v);
  os << '\n';
}

double parse_double(std::string_view tok) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw ConfigError("checkpoint: bad number '" + std::string(tok) + "'");
  }
  return v;
}

void read_values(std::istream& is, const char* tag, Tensor2& t, const std::string& block) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("checkpoint: truncated block '" + block + "'");
  std::istringstream ls(line);
  std::string head;
  ls >> head;
  if (head != tag) throw ConfigError("checkpoint: expected '" + std::string(tag) + "' in block '" + block + "'");
  std::string tok;
  std::size_t i = 0;
  while (ls >> tok) {
    if (i >= t.values.size()) throw ConfigError("checkpoint: too many values in block '" + block + "'");
    t.values[i++] = parse_double(tok);
  }
  if (i != t.values.size()) throw ConfigError("checkpoint: too few values in block '" + block + "'");
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_checkpoint(std::ostream& os, std::span<const ParamBlock* const> blocks, const CheckpointMeta& meta) {
  os << kCheckpointHeader << '\n';
  for (const auto& [k, v] : meta) os << "meta " << k << ' ' << v << '\n';
  for (const ParamBlock* b : blocks) {
    os << "block " << b->name << ' ' << b->weights.rows << ' ' << b->weights.cols << '\n';
    write_values(os, "weights", b->weights);
    write_values(os, "adam_m", b->adam_m);
    write_values(os, "adam_v", b->adam_v);
  }
  os << "end\n";
}

CheckpointMeta read_checkpoint(std::istream& is, std::span<ParamBlock* const> blocks) {
  std::string line;
  if (!std::getline(is, line) || line != kCheckpointHeader) throw ConfigError("checkpoint: missing or unknown header");
  std::unordered_map<std::string, ParamBlock*> by_name;
  for (ParamBlock* b : blocks) by_name.emplace(b->name, b);

  CheckpointMeta meta;
  std::size_t loaded = 0;
  bool ended = false;
  while (std::getline(is, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key;
      ls >> key;
      std::string rest;
      std::getline(ls, rest);
      if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
      meta[key] = rest;
    } else if (kind == "block") {
      std::string name;
      std::size_t rows = 0, cols = 0;
      if (!(ls >> name >> rows >> cols)) throw ConfigError("checkpoint: malformed block line");
      auto it = by_name.find(name);
      if (it == by_name.end()) throw ConfigError("checkpoint: unexpected block '" + name + "'");
      ParamBlock* b = it->second;
      if (b->weights.rows != rows || b->weights.cols != cols) {
        throw ConfigError("checkpoint: shape mismatch for block '" + name + "'");
      }
      read_values(is, "weights", b->weights, name);
      read_values(is, "adam_m", b->adam_m, name);
      read_values(is, "adam_v", b->adam_v, name);
      b->zero_grad();
      ++loaded;
    } else if (!kind.empty()) {
      throw ConfigError("checkpoint: unknown record '" + kind + "'");
    }
  }
  if (!ended) throw ConfigError("checkpoint: missing end marker");
  if (loaded != blocks.size()) throw ConfigError("checkpoint: missing blocks");
  return meta;
}

void save_checkpoint(const std::filesystem::path& path, std::span<const ParamBlock* const> blocks,
                     const CheckpointMeta& meta) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp);
    if (!os) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    write_checkpoint(os, blocks, meta);
    if (!os) throw std::runtime_error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointMeta load_checkpoint(const std::filesystem::path& path, std::span<ParamBlock* const> blocks) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_checkpoint(is, blocks);
}

}  // namespace macrpo::nn
