#include "cssim/checkpoint.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "cssim/errors.hpp"

namespace cssim {

namespace {

constexpr const char* kCheckpointMagic = "CSSIM-CHECKPOINT";
constexpr const char* kTensorsMagic = "CSSIM-TENSORS";

const char* activation_name(Activation a) {
  return a == Activation::Sigmoid ? "sigmoid" : "linear";
}

Activation parse_activation(const std::string& s) {
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "linear") return Activation::Linear;
  throw FormatError("unknown activation '" + s + "'");
}

std::size_t parse_count(const std::string& text) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw FormatError("expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

void write_tensor(std::ostream& out, const std::string& name, const Eigen::MatrixXd& t) {
  out << "tensor " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
  std::array<char, 32> buf{};
  std::string line;
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    line.clear();
    for (Eigen::Index c = 0; c < t.cols(); ++c) {
      if (c > 0) line.push_back(' ');
      const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), t(r, c));
      line.append(buf.data(), res.ptr);
    }
    line.push_back('\n');
    out << line;
  }
}

Eigen::MatrixXd as_column(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::string next() {
    std::string line;
    if (!std::getline(in_, line)) {
      throw FormatError("unexpected end of file after line " + std::to_string(line_no_) +
                        " (truncated?)");
    }
    ++line_no_;
    return line;
  }

  void expect(const std::string& want) {
    const std::string got = next();
    if (got != want) {
      fail("expected '" + want + "', got '" + got + "'");
    }
  }

  // Parses "key = value" and checks the key.
  std::string value_of(const std::string& key) {
    const auto [k, v] = split_key_value(next());
    if (k != key) {
      fail("expected key '" + key + "', got '" + k + "'");
    }
    return v;
  }

  std::pair<std::string, std::string> split_key_value(const std::string& line) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) {
      fail("expected 'key = value', got '" + line + "'");
    }
    return {line.substr(0, eq), line.substr(eq + 3)};
  }

  Eigen::MatrixXd tensor(const std::string& name) {
    std::istringstream head(next());
    std::string word, got_name, rows_s, cols_s, extra;
    head >> word >> got_name >> rows_s >> cols_s;
    if (word != "tensor" || got_name != name || cols_s.empty() || (head >> extra)) {
      fail("expected header for tensor '" + name + "'");
    }
    const std::size_t rows = parse_count(rows_s);
    const std::size_t cols = parse_count(cols_s);
    Eigen::MatrixXd t(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
      const std::string line = next();
      const char* p = line.data();
      const char* end = line.data() + line.size();
      for (std::size_t c = 0; c < cols; ++c) {
        while (p < end && *p == ' ') ++p;
        double v = 0.0;
        const auto res = std::from_chars(p, end, v);
        if (res.ec != std::errc()) {
          fail("bad value in tensor '" + name + "'");
        }
        t(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        p = res.ptr;
      }
      if (p != end) {
        fail("trailing data in tensor '" + name + "'");
      }
    }
    return t;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("line " + std::to_string(line_no_) + ": " + what);
  }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

}  // namespace

std::string format_real(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

double parse_real(const std::string& text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw FormatError("not a real number: '" + text + "'");
  }
  return v;
}

void write_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
  ckpt.params.validate();
  out << kCheckpointMagic << '\n';
  out << "version = " << Checkpoint::kFormatVersion << '\n';

  out << "[config]\n";
  for (const auto& [k, v] : ckpt.config) {
    if (k.find(" = ") != std::string::npos || v.find('\n') != std::string::npos ||
        k.empty() || k.front() == '[') {
      throw FormatError("config entry '" + k + "' cannot be encoded");
    }
    out << k << " = " << v << '\n';
  }

  out << "[architecture]\n";
  out << "signal_length = " << ckpt.arch.signal_length << '\n';
  out << "rate = " << format_real(ckpt.arch.rate) << '\n';
  out << "width_factor = " << ckpt.arch.width_factor << '\n';
  out << "depth = " << ckpt.arch.depth << '\n';
  out << "output_activation = " << activation_name(ckpt.arch.output_activation) << '\n';

  out << "[state]\n";
  out << "epoch = " << ckpt.epoch << '\n';
  out << "early_stop.best = " << format_real(ckpt.early_stop.best) << '\n';
  out << "early_stop.since = " << ckpt.early_stop.epochs_since_improvement << '\n';
  out << "early_stop.patience = " << ckpt.early_stop.patience << '\n';

  out << "[layers]\n";
  out << "count = " << ckpt.params.layers.size() << '\n';
  for (std::size_t l = 0; l < ckpt.params.layers.size(); ++l) {
    const Layer& layer = ckpt.params.layers[l];
    out << "layer " << l << ' ' << activation_name(layer.activation) << ' '
        << (layer.bias ? "bias" : "nobias") << '\n';
    write_tensor(out, "layer." + std::to_string(l) + ".weight", layer.weight);
    if (layer.bias) {
      write_tensor(out, "layer." + std::to_string(l) + ".bias", *layer.bias);
    }
  }

  if (ckpt.adam) {
    const AdamState& a = *ckpt.adam;
    out << "[adam]\n";
    out << "step = " << a.step << '\n';
    out << "learning_rate = " << format_real(a.hyper.learning_rate) << '\n';
    out << "beta1 = " << format_real(a.hyper.beta1) << '\n';
    out << "beta2 = " << format_real(a.hyper.beta2) << '\n';
    out << "epsilon = " << format_real(a.hyper.epsilon) << '\n';
    out << "count = " << a.m.size() << '\n';
    for (std::size_t k = 0; k < a.m.size(); ++k) {
      write_tensor(out, "adam.m." + std::to_string(k), as_column(a.m[k]));
      write_tensor(out, "adam.v." + std::to_string(k), as_column(a.v[k]));
    }
  }
  out << "end\n";
}

Checkpoint read_checkpoint(std::istream& in) {
  LineReader r(in);
  r.expect(kCheckpointMagic);
  const std::string version = r.value_of("version");
  if (version != std::to_string(Checkpoint::kFormatVersion)) {
    throw FormatError("unsupported checkpoint version " + version);
  }

  Checkpoint ckpt;
  r.expect("[config]");
  std::string line = r.next();
  while (line != "[architecture]") {
    ckpt.config.push_back(r.split_key_value(line));
    line = r.next();
  }

  ckpt.arch.signal_length = parse_count(r.value_of("signal_length"));
  ckpt.arch.rate = parse_real(r.value_of("rate"));
  ckpt.arch.width_factor = parse_count(r.value_of("width_factor"));
  ckpt.arch.depth = parse_count(r.value_of("depth"));
  ckpt.arch.output_activation = parse_activation(r.value_of("output_activation"));

  r.expect("[state]");
  ckpt.epoch = parse_count(r.value_of("epoch"));
  ckpt.early_stop.best = parse_real(r.value_of("early_stop.best"));
  ckpt.early_stop.epochs_since_improvement = parse_count(r.value_of("early_stop.since"));
  ckpt.early_stop.patience = parse_count(r.value_of("early_stop.patience"));

  r.expect("[layers]");
  const std::size_t n_layers = parse_count(r.value_of("count"));
  for (std::size_t l = 0; l < n_layers; ++l) {
    std::istringstream head(r.next());
    std::string word, index, act, bias;
    head >> word >> index >> act >> bias;
    if (word != "layer" || index != std::to_string(l) || (bias != "bias" && bias != "nobias")) {
      r.fail("malformed layer header");
    }
    Layer layer;
    layer.activation = parse_activation(act);
    layer.weight = r.tensor("layer." + index + ".weight");
    if (bias == "bias") {
      const Eigen::MatrixXd b = r.tensor("layer." + index + ".bias");
      if (b.cols() != 1) {
        r.fail("bias must be a column");
      }
      layer.bias = Eigen::VectorXd(b.col(0));
    }
    ckpt.params.layers.push_back(std::move(layer));
  }
  try {
    ckpt.params.validate();
  } catch (const DimensionError& e) {
    throw FormatError(std::string("inconsistent layers: ") + e.what());
  }

  line = r.next();
  if (line == "[adam]") {
    AdamState a;
    a.step = parse_count(r.value_of("step"));
    a.hyper.learning_rate = parse_real(r.value_of("learning_rate"));
    a.hyper.beta1 = parse_real(r.value_of("beta1"));
    a.hyper.beta2 = parse_real(r.value_of("beta2"));
    a.hyper.epsilon = parse_real(r.value_of("epsilon"));
    const std::size_t count = parse_count(r.value_of("count"));
    const auto shapes = ckpt.params.tensors();
    if (count != shapes.size()) {
      r.fail("adam state does not match the parameter tensors");
    }
    for (std::size_t k = 0; k < count; ++k) {
      for (auto* dst : {&a.m, &a.v}) {
        const std::string name = std::string(dst == &a.m ? "adam.m." : "adam.v.") + std::to_string(k);
        const Eigen::MatrixXd t = r.tensor(name);
        if (t.cols() != 1 || static_cast<std::size_t>(t.rows()) != shapes[k].size()) {
          r.fail("tensor '" + name + "' has the wrong length");
        }
        dst->emplace_back(t.data(), t.data() + t.size());
      }
    }
    ckpt.adam = std::move(a);
    line = r.next();
  }
  if (line != "end") {
    r.fail("expected 'end', got '" + line + "'");
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FileError("cannot open " + path.string() + " for writing");
  }
  write_checkpoint(ckpt, out);
  if (!out) {
    throw FileError("failed writing " + path.string());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FileError("cannot open checkpoint " + path.string());
  }
  return read_checkpoint(in);
}

void save_sensing_matrix(const Eigen::MatrixXd& phi, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FileError("cannot open " + path.string() + " for writing");
  }
  out << kTensorsMagic << '\n' << "version = " << Checkpoint::kFormatVersion << '\n';
  write_tensor(out, "phi", phi);
  out << "end\n";
  if (!out) {
    throw FileError("failed writing " + path.string());
  }
}

Eigen::MatrixXd load_sensing_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FileError("cannot open " + path.string());
  }
  LineReader r(in);
  r.expect(kTensorsMagic);
  const std::string version = r.value_of("version");
  if (version != std::to_string(Checkpoint::kFormatVersion)) {
    throw FormatError("unsupported tensor file version " + version);
  }
  Eigen::MatrixXd phi = r.tensor("phi");
  r.expect("end");
  return phi;
}

}  // namespace cssim
