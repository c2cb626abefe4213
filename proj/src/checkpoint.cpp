#include "mfirl/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

namespace mfirl::checkpoint {

namespace {

using nlohmann::json;

json net_to_json(const nn::Mlp& net) {
  json j;
  j["dims"] = net.dims;
  j["head"] = net.head == nn::Head::Softmax ? "softmax" : "scalar";
  j["w"] = net.w;
  return j;
}

void net_from_json(const json& j, nn::Mlp& net, const std::string& what) {
  check(j.at("dims").get<std::vector<int>>() == net.dims,
        "checkpoint: " + what + " has mismatched layer sizes against this configuration");
  const Vec w = j.at("w").get<Vec>();
  check(w.size() == net.w.size(), "checkpoint: " + what + " has a mismatched parameter count");
  net.w = w;
}

json adam_to_json(const nn::AdamState& a) {
  json j;
  j["lr"] = a.lr;
  j["beta1"] = a.beta1;
  j["beta2"] = a.beta2;
  j["eps"] = a.eps;
  j["step_count"] = a.step_count;
  j["m"] = a.m;
  j["v"] = a.v;
  return j;
}

void adam_from_json(const json& j, nn::AdamState& a, const std::string& what) {
  a.lr = j.at("lr").get<double>();
  a.beta1 = j.at("beta1").get<double>();
  a.beta2 = j.at("beta2").get<double>();
  a.eps = j.at("eps").get<double>();
  a.step_count = j.at("step_count").get<long>();
  const Vec m = j.at("m").get<Vec>(), v = j.at("v").get<Vec>();
  check(m.size() == a.m.size() && v.size() == a.v.size(),
        "checkpoint: " + what + " optimizer moments have a mismatched size");
  a.m = m;
  a.v = v;
}

json sampler_to_json(const airl::SamplerFlow& s) {
  json j;
  j["nets"] = json::array();
  for (const nn::Mlp& net : s.nets) j["nets"].push_back(net_to_json(net));
  return j;
}

void sampler_from_json(const json& j, airl::SamplerFlow& s, const std::string& what) {
  const json& nets = j.at("nets");
  check(nets.size() == s.nets.size(), "checkpoint: " + what + " has a mismatched network count");
  for (size_t t = 0; t < s.nets.size(); ++t)
    net_from_json(nets[t], s.nets[t], what + " net " + std::to_string(t));
}

void write_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  check(out.good(), "checkpoint: cannot open " + path + " for writing");
  out << j.dump(1) << "\n";
  out.flush();
  check(out.good(), "checkpoint: write to " + path + " failed");
}

json read_file(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "checkpoint: cannot open " + path);
  return json::parse(in);
}

void expect_kind(const json& j, const std::string& kind, const std::string& path) {
  check(j.at("kind").get<std::string>() == kind,
        "checkpoint: " + path + " holds a '" + j.at("kind").get<std::string>() +
            "' state, expected '" + kind + "'");
}

}  // namespace

void save_pemmfirl(const pemmfirl::PemmfirlState& st, const std::string& config_echo,
                   const std::string& path) {
  json j;
  j["kind"] = "pemmfirl";
  j["config_echo"] = config_echo;
  j["iteration"] = st.iteration;
  j["d_f"] = net_to_json(st.d.f);
  j["q_encoder"] = net_to_json(st.q.encoder);
  j["samplers"] = json::array();
  for (const airl::SamplerFlow& s : st.samplers) j["samplers"].push_back(sampler_to_json(s));
  j["opt_omega"] = adam_to_json(st.opt_omega);
  j["opt_psi"] = adam_to_json(st.opt_psi);
  j["opt_theta"] = json::array();
  for (const auto& per_context : st.opt_theta) {
    json row = json::array();
    for (const nn::AdamState& a : per_context) row.push_back(adam_to_json(a));
    j["opt_theta"].push_back(row);
  }
  j["rng_expert"] = st.rng_expert.state_string();
  j["rng_context"] = st.rng_context.state_string();
  j["rng_rollout"] = st.rng_rollout.state_string();
  write_file(j, path);
}

void load_pemmfirl(pemmfirl::PemmfirlState& st, const std::string& path) {
  const json j = read_file(path);
  expect_kind(j, "pemmfirl", path);
  st.iteration = j.at("iteration").get<int>();
  net_from_json(j.at("d_f"), st.d.f, "discriminator");
  net_from_json(j.at("q_encoder"), st.q.encoder, "inference encoder");
  const json& samplers = j.at("samplers");
  check(samplers.size() == st.samplers.size(),
        "checkpoint: " + path + " has a mismatched sampler count");
  for (size_t m = 0; m < st.samplers.size(); ++m)
    sampler_from_json(samplers[m], st.samplers[m], "sampler " + std::to_string(m));
  adam_from_json(j.at("opt_omega"), st.opt_omega, "omega");
  adam_from_json(j.at("opt_psi"), st.opt_psi, "psi");
  const json& theta = j.at("opt_theta");
  check(theta.size() == st.opt_theta.size(),
        "checkpoint: " + path + " has a mismatched theta optimizer count");
  for (size_t m = 0; m < st.opt_theta.size(); ++m) {
    check(theta[m].size() == st.opt_theta[m].size(),
          "checkpoint: " + path + " has a mismatched per-step optimizer count");
    for (size_t t = 0; t < st.opt_theta[m].size(); ++t)
      adam_from_json(theta[m][t], st.opt_theta[m][t],
                     "theta " + std::to_string(m) + "/" + std::to_string(t));
  }
  st.rng_expert.set_state(j.at("rng_expert").get<std::string>());
  st.rng_context.set_state(j.at("rng_context").get<std::string>());
  st.rng_rollout.set_state(j.at("rng_rollout").get<std::string>());
}

void save_airl(const airl::AirlState& st, const std::string& config_echo,
               const std::string& path) {
  json j;
  j["kind"] = "mfairl";
  j["config_echo"] = config_echo;
  j["iteration"] = st.iteration;
  j["d_f"] = net_to_json(st.d.f);
  j["sampler"] = sampler_to_json(st.sampler);
  j["opt_omega"] = adam_to_json(st.opt_omega);
  j["opt_theta"] = json::array();
  for (const nn::AdamState& a : st.opt_theta) j["opt_theta"].push_back(adam_to_json(a));
  j["rng_expert"] = st.rng_expert.state_string();
  j["rng_rollout"] = st.rng_rollout.state_string();
  write_file(j, path);
}

void load_airl(airl::AirlState& st, const std::string& path) {
  const json j = read_file(path);
  expect_kind(j, "mfairl", path);
  st.iteration = j.at("iteration").get<int>();
  net_from_json(j.at("d_f"), st.d.f, "discriminator");
  sampler_from_json(j.at("sampler"), st.sampler, "sampler");
  adam_from_json(j.at("opt_omega"), st.opt_omega, "omega");
  const json& theta = j.at("opt_theta");
  check(theta.size() == st.opt_theta.size(),
        "checkpoint: " + path + " has a mismatched theta optimizer count");
  for (size_t t = 0; t < st.opt_theta.size(); ++t)
    adam_from_json(theta[t], st.opt_theta[t], "theta " + std::to_string(t));
  st.rng_expert.set_state(j.at("rng_expert").get<std::string>());
  st.rng_rollout.set_state(j.at("rng_rollout").get<std::string>());
}

std::string saved_kind(const std::string& path) {
  return read_file(path).at("kind").get<std::string>();
}

std::string saved_config_echo(const std::string& path) {
  return read_file(path).at("config_echo").get<std::string>();
}

int saved_iteration(const std::string& path) {
  return read_file(path).at("iteration").get<int>();
}

}  // namespace mfirl::checkpoint
