#include "topoflow/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "topoflow/gfd.hpp"

namespace topoflow::model {

Field params_to_field(ParamStore& params) {
  auto views = params.tensors();
  std::size_t width = 1;
  for (const auto& v : views) width = std::max(width, v.data.size());
  GridSpec spec{1, static_cast<int>(width), 1, 1, 1};
  std::vector<std::string> names, units;
  std::vector<float> data(views.size() * width, 0.0f);
  for (std::size_t i = 0; i < views.size(); ++i) {
    names.push_back(views[i].name);
    units.push_back(std::to_string(views[i].rows) + "x" + std::to_string(views[i].cols));
    for (std::size_t k = 0; k < views[i].data.size(); ++k) data[i * width + k] = static_cast<float>(views[i].data[k]);
  }
  return Field(spec, std::move(names), std::move(units), std::move(data));
}

void params_from_field(const Field& f, ParamStore& params) {
  auto views = params.tensors();
  if (f.num_channels() != views.size())
    throw DataError("checkpoint holds " + std::to_string(f.num_channels()) + " tensors, model expects " +
                    std::to_string(views.size()));
  for (std::size_t i = 0; i < views.size(); ++i) {
    const std::string shape = std::to_string(views[i].rows) + "x" + std::to_string(views[i].cols);
    if (f.channels()[i] != views[i].name || f.units()[i] != shape)
      throw DataError("checkpoint tensor '" + f.channels()[i] + "' (" + f.units()[i] + ") does not match '" +
                      views[i].name + "' (" + shape + ")");
    auto ch = f.channel(i);
    for (std::size_t k = 0; k < views[i].data.size(); ++k) views[i].data[k] = ch[k];
  }
}

void save_checkpoint(const std::filesystem::path& gfd_path, ParamStore& params, const CheckpointInfo& info) {
  gfd::write(params_to_field(params), gfd_path);
  auto side = gfd_path;
  side.replace_extension(".txt");
  std::ofstream os(side, std::ios::trunc);
  if (!os) throw DataError("cannot write '" + side.string() + "'");
  os << "seed = " << info.seed << "\nstep = " << info.step << "\n";
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& v : params.tensors()) groups[to_string(v.group)].push_back(v.name);
  for (const auto& [g, names] : groups) {
    os << "group." << g << " =";
    for (const auto& n : names) os << ' ' << n;
    os << '\n';
  }
  os << "# config\n" << info.config_echo;
}

void load_checkpoint(const std::filesystem::path& gfd_path, ParamStore& params) {
  params_from_field(gfd::read(gfd_path), params);
}

}  // namespace topoflow::model
