#include <cmath>
#include <sstream>

#include "xmrca/core/error.hpp"
#include "xmrca/gat/model.hpp"
#include "xmrca/ingest/csv.hpp"

namespace xmrca {

namespace {

constexpr std::string_view kMagic = "xmrca-gat-model 1";

void write_row(std::ostringstream& out, std::string_view name, std::span<const double> values) {
  out << name << ' ' << values.size();
  for (double v : values) out << ' ' << format_double(v);
  out << '\n';
}

class Reader {
 public:
  explicit Reader(std::string_view text) : in_(std::string(text)) {}

  void expect(std::string_view name) {
    std::string word;
    if (!(in_ >> word) || word != name) fail("expected '" + std::string(name) + "'");
  }

  template <typename T>
  T field(std::string_view name) {
    expect(name);
    T value{};
    if (!(in_ >> value)) fail("bad value for '" + std::string(name) + "'");
    return value;
  }

  double number() {
    std::string word;
    if (!(in_ >> word)) fail("truncated number list");
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(word, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != word.size()) fail("bad number '" + word + "'");
    return v;
  }

  std::vector<double> row(std::string_view name, std::size_t expected) {
    const auto n = field<std::size_t>(name);
    if (n != expected) fail("'" + std::string(name) + "' has " + std::to_string(n) + " entries, expected " +
                            std::to_string(expected));
    std::vector<double> values(n);
    for (double& v : values) v = number();
    return values;
  }

  [[noreturn]] static void fail(const std::string& msg) {
    throw Error(ErrorCode::kSchemaViolation, "model file: " + msg);
  }

 private:
  std::istringstream in_;
};

}  // namespace

std::string serialize_model(const GatModel& model) {
  const auto& c = model.config();
  std::ostringstream out;
  out << kMagic << '\n';
  out << "fingerprint " << model.fingerprint() << '\n';
  out << "embedding_dim " << c.embedding_dim << '\n';
  out << "heads " << c.heads << '\n';
  out << "epochs " << c.epochs << '\n';
  out << "learning_rate " << format_double(c.learning_rate) << '\n';
  out << "patience " << c.patience << '\n';
  out << "validation_fraction " << format_double(c.validation_fraction) << '\n';
  out << "leaky_slope " << format_double(c.leaky_slope) << '\n';
  out << "seed " << c.seed << '\n';
  out << "fundamentals " << model.num_fundamentals() << '\n';
  out << "derived " << model.num_derived() << '\n';
  write_row(out, "input_mean", model.input_normalizer().mean);
  write_row(out, "input_scale", model.input_normalizer().scale);
  write_row(out, "output_mean", model.output_normalizer().mean);
  write_row(out, "output_scale", model.output_normalizer().scale);
  write_row(out, "parameters", model.parameters());
  return out.str();
}

GatModel deserialize_model(std::string_view text) {
  const auto first_line = text.substr(0, text.find('\n'));
  if (first_line != kMagic) Reader::fail("unknown header '" + std::string(first_line) + "'");
  Reader in(text.substr(first_line.size()));
  GatConfig c;
  const auto fingerprint = in.field<std::uint64_t>("fingerprint");
  c.embedding_dim = in.field<std::size_t>("embedding_dim");
  c.heads = in.field<std::size_t>("heads");
  c.epochs = in.field<std::size_t>("epochs");
  in.expect("learning_rate");
  c.learning_rate = in.number();
  c.patience = in.field<std::size_t>("patience");
  in.expect("validation_fraction");
  c.validation_fraction = in.number();
  in.expect("leaky_slope");
  c.leaky_slope = in.number();
  c.seed = in.field<std::uint64_t>("seed");
  const auto p = in.field<std::size_t>("fundamentals");
  const auto q = in.field<std::size_t>("derived");

  GatModel model(c, p, q, fingerprint);
  model.input_normalizer().mean = in.row("input_mean", model.num_inputs());
  model.input_normalizer().scale = in.row("input_scale", model.num_inputs());
  model.output_normalizer().mean = in.row("output_mean", model.num_outputs());
  model.output_normalizer().scale = in.row("output_scale", model.num_outputs());
  const auto params = in.row("parameters", model.parameters().size());
  std::copy(params.begin(), params.end(), model.parameters().begin());
  for (double s : model.input_normalizer().scale) {
    if (!(s > 0.0)) Reader::fail("normaliser scale must be positive");
  }
  for (double s : model.output_normalizer().scale) {
    if (!(s > 0.0)) Reader::fail("normaliser scale must be positive");
  }
  for (double v : params) {
    if (!std::isfinite(v)) Reader::fail("non-finite weight");
  }
  return model;
}

void save_model(const GatModel& model, const std::string& path) { write_text_file(path, serialize_model(model)); }

GatModel load_model(const std::string& path) { return deserialize_model(read_text_file(path)); }

}  // namespace xmrca
