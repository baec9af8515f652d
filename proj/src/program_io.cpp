#include "structune/program_io.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "structune/error.hpp"
#include "structune/system_io.hpp"

namespace structune {

using nlohmann::json;

namespace {

std::vector<int> index_list(const json& j, const char* key) {
  std::vector<int> out;
  if (!j.contains(key)) return out;
  for (const auto& v : j.at(key)) out.push_back(v.get<int>());
  return out;
}

RequirementKind kind_from(const std::string& s) {
  if (s == "hinf") return RequirementKind::Hinf;
  if (s == "h2") return RequirementKind::H2;
  if (s == "poles") return RequirementKind::PoleRegion;
  throw Error(ErrorKind::Parse, "unknown requirement kind '" + s + "'");
}

const char* kind_name(RequirementKind k) {
  switch (k) {
    case RequirementKind::Hinf: return "hinf";
    case RequirementKind::H2: return "h2";
    case RequirementKind::PoleRegion: return "poles";
  }
  return "?";
}

Requirement requirement_from_json(const json& j) {
  Requirement r;
  r.model = j.value("model", 0);
  r.w = index_list(j, "w");
  r.z = index_list(j, "z");
  r.kind = kind_from(j.at("kind").get<std::string>());
  if (r.kind == RequirementKind::PoleRegion)
    r.goal = pole_goal_from_json(j.at("goal"));
  else
    r.bound = j.value("bound", 1.0);
  const std::string cls = j.value("class", std::string("soft"));
  if (cls == "soft")
    r.cls = RequirementClass::Soft;
  else if (cls == "hard")
    r.cls = RequirementClass::Hard;
  else
    throw Error(ErrorKind::Parse, "requirement class must be 'soft' or 'hard'");
  r.weight = j.value("weight", 1.0);
  return r;
}

json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace

PoleGoal pole_goal_from_json(const json& j) {
  PoleGoal g;
  try {
    if (j.is_array()) {
      if (j.size() != 3) throw Error(ErrorKind::Parse, "pole goal array must be [decay, damping, max_frequency]");
      g.min_decay = j[0].get<double>();
      g.min_damping = j[1].get<double>();
      g.max_frequency = j[2].is_null() ? INFINITY : j[2].get<double>();
    } else {
      g.min_decay = j.value("min_decay", 0.0);
      g.min_damping = j.value("min_damping", 0.0);
      if (j.contains("max_frequency") && !j.at("max_frequency").is_null())
        g.max_frequency = j.at("max_frequency").get<double>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, e.what());
  }
  g.validate();
  return g;
}

json to_json(const PoleGoal& goal) {
  json j{{"min_decay", goal.min_decay}, {"min_damping", goal.min_damping}};
  j["max_frequency"] = std::isfinite(goal.max_frequency) ? json(goal.max_frequency) : json(nullptr);
  return j;
}

Program program_from_json(const json& j) {
  Program p;
  try {
    for (const auto& m : j.at("models")) p.models.push_back(plant_from_json(m));
    p.structure = structure_from_json(j.at("structure"));
    for (const auto& r : j.at("requirements")) p.requirements.push_back(requirement_from_json(r));
    if (j.contains("schedule_samples"))
      for (const auto& q : j.at("schedule_samples")) p.schedule_samples.push_back(q.get<double>());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, e.what());
  }
  // A single model paired with several schedule samples is replicated per sample.
  if (p.models.size() == 1 && p.schedule_samples.size() > 1) {
    const auto base_reqs = p.requirements;
    p.models.assign(p.schedule_samples.size(), p.models.front());
    p.requirements.clear();
    for (std::size_t i = 0; i < p.models.size(); ++i)
      for (auto r : base_reqs) {
        r.model = static_cast<int>(i);
        p.requirements.push_back(r);
      }
  }
  p.validate();
  return p;
}

json to_json(const Program& program) {
  json j;
  j["models"] = json::array();
  for (const auto& m : program.models) j["models"].push_back(to_json(m));
  j["structure"] = to_json(program.structure);
  j["requirements"] = json::array();
  for (const auto& r : program.requirements) {
    json jr{{"model", r.model}, {"w", r.w}, {"z", r.z}, {"kind", kind_name(r.kind)},
            {"class", r.cls == RequirementClass::Soft ? "soft" : "hard"}, {"weight", r.weight}};
    if (r.kind == RequirementKind::PoleRegion)
      jr["goal"] = to_json(r.goal);
    else
      jr["bound"] = r.bound;
    j["requirements"].push_back(jr);
  }
  if (!program.schedule_samples.empty()) j["schedule_samples"] = program.schedule_samples;
  return j;
}

InitStrategy init_from_json(const json& j) {
  try {
    if (j.contains("x0")) {
      const auto v = j.at("x0").get<std::vector<double>>();
      return InitGiven{Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()))};
    }
    if (j.contains("seed")) return InitRandom{j.at("seed").get<std::uint64_t>()};
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, e.what());
  }
  return InitZeros{};
}

json to_json(const SynthResult& r, const Program& program) {
  json j;
  j["status"] = to_string(r.status);
  j["x_star"] = vector_json(r.x_star.x);
  j["f_star"] = r.f_star;
  j["g_star"] = r.g_star;
  j["certificate"] = r.certificate;
  j["requirement_values"] = r.requirement_values;
  if (!r.message.empty()) j["message"] = r.message;
  j["serious_steps"] = r.history.size();
  if (r.status != SynthStatus::Unstabilizable && r.x_star.x.size() == parameter_count(program.structure)) {
    json ctrl = json::array();
    for (std::size_t i = 0; i < program.models.size(); ++i) {
      const auto q = program.schedule_for(static_cast<int>(i));
      json c{{"model", i}, {"controller", to_json(assemble(program.structure, r.x_star.x, q))}};
      if (q) c["schedule_value"] = *q;
      const ModelLoop loop = close_model(program, static_cast<int>(i), r.x_star.x);
      json poles = json::array();
      for (const auto& l : loop.spectrum.eigenvalues) poles.push_back({l.real(), l.imag()});
      c["closed_loop_poles"] = poles;
      ctrl.push_back(c);
    }
    j["controllers"] = ctrl;
  }
  return j;
}

void write_history_csv(std::ostream& os, const std::vector<HistoryRecord>& history) {
  os << "serious_idx,f,g,tau,step_norm,certificate\n";
  char buf[256];
  int idx = 0;
  for (const auto& h : history) {
    std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%.12g,%.12g,%.12g\n", idx++, h.step.f, h.step.aux, h.step.tau,
                  h.step.step_norm, h.step.certificate);
    os << buf;
  }
}

}  // namespace structune
