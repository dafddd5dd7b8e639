// Checkpoint layout, one record per line, comma separated:
//
//   histocell-mlp v1
//   layer_dims,D,h1,...,h7,C
//   seed,<u64>
//   cell_types,<name>,...
//   mean,<D reals>
//   std,<D reals>
//   weight,<k>,<rows>,<cols>      followed by <rows> lines of <cols> reals
//   bias,<k>,<len>                followed by one line of <len> reals
//
// Reals use 17 significant digits so that load(save(m)) == m exactly.

#include <charconv>

#include "histocell/csv.hpp"
#include "histocell/errors.hpp"
#include "histocell/regressor.hpp"

namespace histocell {
namespace {

constexpr std::string_view kMagic = "histocell-mlp v1";

template <typename Vec>
void write_reals(std::ofstream& out, const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out << ',';
    out << csv::format_real(v(i));
  }
  out << '\n';
}

class CheckpointReader {
 public:
  explicit CheckpointReader(const std::filesystem::path& path) : reader_(path) {}

  std::vector<std::string_view> record(std::string_view tag) {
    if (!reader_.next(line_)) fail("unexpected end of file, expected '" + std::string(tag) + "'");
    auto fields = csv::split(line_);
    if (!tag.empty() && fields.front() != tag) fail("expected '" + std::string(tag) + "' record");
    return fields;
  }

  std::vector<double> reals(std::size_t expected) {
    const auto fields = record("");
    if (fields.size() != expected)
      fail("expected " + std::to_string(expected) + " values, got " + std::to_string(fields.size()));
    std::vector<double> out;
    out.reserve(expected);
    for (const auto f : fields) {
      const auto v = csv::parse_real(f);
      if (!v) fail("malformed real '" + std::string(f) + "'");
      out.push_back(*v);
    }
    return out;
  }

  std::uint64_t integer(std::string_view field) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size()) fail("malformed integer '" + std::string(field) + "'");
    return v;
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw SchemaError(reader_.path(), reader_.line_number(), message);
  }

 private:
  csv::LineReader reader_;
  std::string line_;
};

}  // namespace

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  auto out = csv::open_output(path);
  out << kMagic << '\n';
  out << "layer_dims";
  for (auto d : model.layer_dims) out << ',' << d;
  out << "\nseed," << model.seed << '\n';
  out << "cell_types";
  for (const auto& t : model.cell_types) out << ',' << t;
  out << "\nmean,";
  write_reals(out, model.standardizer.means);
  out << "std,";
  write_reals(out, model.standardizer.stds);
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    const auto& l = model.layers[k];
    out << "weight," << k << ',' << l.weight.rows() << ',' << l.weight.cols() << '\n';
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) write_reals(out, l.weight.row(r));
    out << "bias," << k << ',' << l.bias.size() << '\n';
    write_reals(out, l.bias);
  }
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

MlpModel load_model(const std::filesystem::path& path) {
  CheckpointReader in(path);
  const auto magic = in.record("");
  if (magic.size() != 1 || magic.front() != kMagic) in.fail("not a histocell-mlp v1 checkpoint");

  MlpModel model;
  const auto dims = in.record("layer_dims");
  for (std::size_t i = 1; i < dims.size(); ++i) model.layer_dims.push_back(in.integer(dims[i]));
  if (model.layer_dims.size() != kHiddenLayers + 2) in.fail("layer_dims must list " + std::to_string(kHiddenLayers + 2) + " sizes");
  for (auto d : model.layer_dims)
    if (d == 0) in.fail("layer_dims must be positive");

  const auto seed = in.record("seed");
  if (seed.size() != 2) in.fail("malformed seed record");
  model.seed = in.integer(seed[1]);

  const auto types = in.record("cell_types");
  for (std::size_t i = 1; i < types.size(); ++i) model.cell_types.emplace_back(types[i]);
  if (model.cell_types.size() != model.output_dim()) in.fail("cell_types count does not match output width");

  auto vector_record = [&](std::string_view tag) {
    const auto fields = in.record(tag);
    if (fields.size() != model.input_dim() + 1) in.fail("'" + std::string(tag) + "' has the wrong length");
    Eigen::RowVectorXd v(static_cast<Eigen::Index>(model.input_dim()));
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const auto x = csv::parse_real(fields[i]);
      if (!x) in.fail("malformed real '" + std::string(fields[i]) + "'");
      v(static_cast<Eigen::Index>(i - 1)) = *x;
    }
    return v;
  };
  model.standardizer.means = vector_record("mean");
  model.standardizer.stds = vector_record("std");
  if ((model.standardizer.stds.array() <= 0.0).any()) in.fail("standardizer stds must be positive");

  for (std::size_t k = 0; k + 1 < model.layer_dims.size(); ++k) {
    const auto rows = model.layer_dims[k + 1];
    const auto cols = model.layer_dims[k];
    const auto wh = in.record("weight");
    if (wh.size() != 4 || in.integer(wh[1]) != k || in.integer(wh[2]) != rows || in.integer(wh[3]) != cols)
      in.fail("weight header for layer " + std::to_string(k) + " does not match layer_dims");
    Layer layer{Matrix(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)),
                Eigen::VectorXd(static_cast<Eigen::Index>(rows))};
    for (std::size_t r = 0; r < rows; ++r) {
      const auto values = in.reals(cols);
      for (std::size_t c = 0; c < cols; ++c)
        layer.weight(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[c];
    }
    const auto bh = in.record("bias");
    if (bh.size() != 3 || in.integer(bh[1]) != k || in.integer(bh[2]) != rows)
      in.fail("bias header for layer " + std::to_string(k) + " does not match layer_dims");
    const auto values = in.reals(rows);
    for (std::size_t r = 0; r < rows; ++r) layer.bias(static_cast<Eigen::Index>(r)) = values[r];
    model.layers.push_back(std::move(layer));
  }
  return model;
}

}  // namespace histocell
