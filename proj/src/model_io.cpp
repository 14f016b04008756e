#include "rhc/model_io.hpp"

#include <fstream>
#include <stdexcept>

namespace rhc {

using nlohmann::json;

namespace {

json vec_to_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd vec_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

template <std::size_t N>
json arr_to_json(const std::array<double, N>& a) {
  return json(std::vector<double>(a.begin(), a.end()));
}

template <std::size_t N>
std::array<double, N> arr_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != N) throw std::runtime_error("model file: wrong array length");
  std::array<double, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

}  // namespace

json plan_to_json(const BudgetPlan& plan) {
  json steps = json::array();
  for (const auto& s : plan.steps)
    steps.push_back({{"group", s.group},
                     {"name", s.name},
                     {"cumulative_cost_ms", s.cumulative_cost_ms},
                     {"explained_gain", s.explained_gain},
                     {"validation_rmse", s.validation_rmse}});
  return {{"budget_ms", plan.budget_ms},
          {"baseline_rmse", plan.baseline_rmse},
          {"warning", plan.warning},
          {"message", plan.message},
          {"steps", steps}};
}

BudgetPlan plan_from_json(const json& j) {
  BudgetPlan p;
  p.budget_ms = j.at("budget_ms").get<double>();
  p.baseline_rmse = j.at("baseline_rmse").get<double>();
  p.warning = j.at("warning").get<bool>();
  p.message = j.at("message").get<std::string>();
  for (const auto& s : j.at("steps")) {
    PlanStep ps;
    ps.group = s.at("group").get<int>();
    ps.name = s.at("name").get<std::string>();
    ps.cumulative_cost_ms = s.at("cumulative_cost_ms").get<double>();
    ps.explained_gain = s.at("explained_gain").get<double>();
    ps.validation_rmse = s.at("validation_rmse").get<double>();
    p.steps.push_back(ps);
  }
  return p;
}

json lut_to_json(const ErrorLUT& lut) {
  json bins = json::array();
  for (const auto& b : lut.bins)
    bins.push_back({{"d_near", b.d_near}, {"d_far", b.d_far}, {"n_near", b.n_near}, {"n_far", b.n_far}});
  return {{"min_count", lut.min_count}, {"bins", bins}};
}

ErrorLUT lut_from_json(const json& j) {
  ErrorLUT lut;
  lut.min_count = j.at("min_count").get<int>();
  for (const auto& b : j.at("bins"))
    lut.bins.push_back({b.at("d_near").get<double>(), b.at("d_far").get<double>(), b.at("n_near").get<int>(),
                        b.at("n_far").get<int>()});
  if (!lut.bins.empty() && lut.size() != static_cast<int>(kMaxDepth))
    throw std::runtime_error("model file: LUT must have one bin per metre up to the depth cap");
  return lut;
}

json model_to_json(const DepthModel& m) {
  json layout = json::array();
  for (const auto& s : m.layout.slots)
    layout.push_back({{"group", std::string(group_name(s.group))}, {"offset", s.offset}, {"length", s.length},
                      {"cost_ms", s.cost_ms}});
  json stages = json::array();
  for (const auto& st : m.regressor.stages)
    stages.push_back({{"bias", st.bias},
                      {"weights", vec_to_json(st.weights)},
                      {"p_weight", st.p_weight},
                      {"basis_weights", arr_to_json(st.basis_weights)},
                      {"basis_mean", arr_to_json(st.basis_mean)},
                      {"basis_scale", arr_to_json(st.basis_scale)},
                      {"lambda", st.lambda},
                      {"train_rmse", st.train_rmse}});
  return {{"format", "rhc-depth-model"},
          {"version", m.version},
          {"patch_size", m.patch_size},
          {"layout", layout},
          {"regressor",
           {{"feature_mean", vec_to_json(m.regressor.feature_mean)},
            {"feature_scale", vec_to_json(m.regressor.feature_scale)},
            {"stages", stages}}},
          {"lut", lut_to_json(m.lut)},
          {"plan", plan_to_json(m.plan)}};
}

DepthModel model_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "rhc-depth-model") throw std::runtime_error("not a depth model file");
    DepthModel m;
    m.version = j.at("version").get<int>();
    if (m.version != 1) throw std::runtime_error("unsupported model version " + std::to_string(m.version));
    m.patch_size = j.at("patch_size").get<int>();
    GroupSet groups;
    for (const auto& s : j.at("layout")) groups.insert(parse_group(s.at("group").get<std::string>()));
    m.layout = FeatureLayout::for_groups(groups);
    std::size_t i = 0;
    for (const auto& s : j.at("layout")) {
      GroupSlot& slot = m.layout.slots.at(i++);
      if (slot.offset != s.at("offset").get<int>() || slot.length != s.at("length").get<int>())
        throw std::runtime_error("layout does not match this build's feature dimensions");
      slot.cost_ms = s.at("cost_ms").get<double>();
    }
    const json& r = j.at("regressor");
    m.regressor.feature_mean = vec_from_json(r.at("feature_mean"));
    m.regressor.feature_scale = vec_from_json(r.at("feature_scale"));
    for (const auto& s : r.at("stages")) {
      RegressionStage st;
      st.bias = s.at("bias").get<double>();
      st.weights = vec_from_json(s.at("weights"));
      st.p_weight = s.at("p_weight").get<double>();
      st.basis_weights = arr_from_json<kStageBasis - 1>(s.at("basis_weights"));
      st.basis_mean = arr_from_json<kStageBasis - 1>(s.at("basis_mean"));
      st.basis_scale = arr_from_json<kStageBasis - 1>(s.at("basis_scale"));
      st.lambda = s.at("lambda").get<double>();
      st.train_rmse = s.at("train_rmse").get<double>();
      if (st.weights.size() != m.regressor.feature_mean.size()) throw std::runtime_error("stage weight size mismatch");
      m.regressor.stages.push_back(std::move(st));
    }
    if (m.regressor.dims() != m.layout.dims() || m.regressor.feature_scale.size() != m.regressor.feature_mean.size())
      throw std::runtime_error("regressor dimension does not match the layout");
    m.lut = lut_from_json(j.at("lut"));
    m.plan = plan_from_json(j.at("plan"));
    return m;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("model file: ") + e.what());
  }
}

void save_model(const std::string& path, const DepthModel& model) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write model file " + path);
  os << model_to_json(model).dump(1) << '\n';
  if (!os) throw std::runtime_error("failed writing model file " + path);
}

DepthModel load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open model file " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw std::runtime_error("model file " + path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace rhc
