#include "lootcrawl/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace lootcrawl::config {

namespace {

constexpr const char* kSchemaText =
#include "run_config_schema.inc"
    ;

std::string type_of(const json& v) {
  if (v.is_null()) return "null";
  if (v.is_boolean()) return "boolean";
  if (v.is_number_integer() || v.is_number_unsigned()) return "integer";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_array()) return "array";
  return "object";
}

bool type_matches(const json& v, const std::string& type) {
  const std::string actual = type_of(v);
  if (type == "number") return actual == "number" || actual == "integer";
  if (type == "integer" && actual == "number") {
    const double d = v.get<double>();
    return std::floor(d) == d;
  }
  return actual == type;
}

class Validator {
 public:
  explicit Validator(const json& root) : root_(root) {}

  void check(const json& v, const json& s, const std::string& path, std::vector<SchemaIssue>& out) const {
    if (s.contains("$ref")) {
      check(v, resolve(s["$ref"].get<std::string>()), path, out);
      return;
    }
    auto fail = [&](const std::string& msg) { out.push_back({path.empty() ? "/" : path, msg}); };

    if (s.contains("oneOf")) {
      int matched = 0;
      std::vector<SchemaIssue> best;
      for (const auto& alt : s["oneOf"]) {
        std::vector<SchemaIssue> issues;
        check(v, alt, path, issues);
        if (issues.empty()) {
          ++matched;
        } else if (best.empty() || issues.size() < best.size()) {
          best = std::move(issues);
        }
      }
      if (matched == 0) {
        fail("does not match any allowed form");
        out.insert(out.end(), best.begin(), best.end());
      } else if (matched > 1) {
        fail("matches more than one allowed form");
      }
    }
    if (s.contains("type") && !type_matches(v, s["type"].get<std::string>())) {
      fail("expected " + s["type"].get<std::string>() + ", got " + type_of(v));
      return;
    }
    if (s.contains("const") && v != s["const"]) fail("must equal " + s["const"].dump());
    if (s.contains("enum")) {
      bool found = false;
      for (const auto& e : s["enum"]) found = found || e == v;
      if (!found) fail("must be one of " + s["enum"].dump());
    }
    if (v.is_number()) {
      const double d = v.get<double>();
      if (s.contains("minimum") && d < s["minimum"].get<double>()) fail("must be >= " + s["minimum"].dump());
      if (s.contains("maximum") && d > s["maximum"].get<double>()) fail("must be <= " + s["maximum"].dump());
      if (s.contains("exclusiveMinimum") && d <= s["exclusiveMinimum"].get<double>()) fail("must be > " + s["exclusiveMinimum"].dump());
      if (s.contains("exclusiveMaximum") && d >= s["exclusiveMaximum"].get<double>()) fail("must be < " + s["exclusiveMaximum"].dump());
    }
    if (v.is_string() && s.contains("minLength") && v.get<std::string>().size() < s["minLength"].get<std::size_t>()) {
      fail("string too short");
    }
    if (v.is_array()) {
      if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>()) fail("needs at least " + s["minItems"].dump() + " items");
      if (s.contains("maxItems") && v.size() > s["maxItems"].get<std::size_t>()) fail("allows at most " + s["maxItems"].dump() + " items");
      if (s.contains("items")) {
        for (std::size_t i = 0; i < v.size(); ++i) check(v[i], s["items"], path + "/" + std::to_string(i), out);
      }
    }
    if (v.is_object()) {
      if (s.contains("minProperties") && v.size() < s["minProperties"].get<std::size_t>()) fail("too few properties");
      if (s.contains("required")) {
        for (const auto& key : s["required"]) {
          if (!v.contains(key.get<std::string>())) fail("missing required key '" + key.get<std::string>() + "'");
        }
      }
      const json* props = s.contains("properties") ? &s["properties"] : nullptr;
      for (auto it = v.begin(); it != v.end(); ++it) {
        const std::string child = path + "/" + it.key();
        if (props && props->contains(it.key())) {
          check(it.value(), (*props)[it.key()], child, out);
        } else if (s.contains("additionalProperties")) {
          const json& extra = s["additionalProperties"];
          if (extra.is_boolean()) {
            if (!extra.get<bool>()) out.push_back({child, "unknown key '" + it.key() + "'"});
          } else {
            check(it.value(), extra, child, out);
          }
        }
      }
    }
  }

 private:
  const json& resolve(const std::string& ref) const {
    const std::string prefix = "#/$defs/";
    if (ref.rfind(prefix, 0) != 0) throw Error(ErrorCode::ConfigInvalid, "unsupported schema reference " + ref);
    return root_.at("$defs").at(ref.substr(prefix.size()));
  }

  const json& root_;
};

EntityKind loot_kind_from_string(const std::string& s) {
  if (s == "melee") return EntityKind::MeleeWeapon;
  if (s == "ranged") return EntityKind::RangedWeapon;
  if (s == "potion") return EntityKind::Potion;
  throw Error(ErrorCode::InvalidSpec, "unknown loot kind '" + s + "'");
}

json pair_json(IntRange r) { return json::array({r.min, r.max}); }
IntRange pair_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

}  // namespace

const json& run_config_schema() {
  static const json schema = json::parse(kSchemaText);
  return schema;
}

std::vector<SchemaIssue> validate(const json& doc, const json& schema) {
  std::vector<SchemaIssue> out;
  Validator(schema).check(doc, schema, "", out);
  return out;
}

json loot_spec_to_json(const LootDistributionSpec& spec) {
  if (const auto* p = std::get_if<ProceduralLoot>(&spec.dist)) {
    return {{"type", "procedural"}, {"attr_lo", p->attr_lo}, {"attr_hi", p->attr_hi}};
  }
  const auto& set = std::get<FixedSetLoot>(spec.dist);
  json templates = json::array();
  for (const auto& t : set.templates) {
    templates.push_back({{"kind", to_string(t.item.kind)}, {"bonuses", t.item.bonuses.as_array()}, {"weight", t.weight}});
  }
  json out{{"type", "fixed_set"}, {"templates", templates}};
  if (set.fallback) out["fallback"] = {{"attr_lo", set.fallback->attr_lo}, {"attr_hi", set.fallback->attr_hi}};
  return out;
}

LootDistributionSpec loot_spec_from_json(const json& j) {
  LootDistributionSpec spec;
  try {
    if (j.is_string()) return LootDistributionSpec::preset(j.get<std::string>());
    const std::string type = j.at("type").get<std::string>();
    if (type == "procedural") {
      spec = LootDistributionSpec::procedural(j.value("attr_lo", -3), j.value("attr_hi", 5));
    } else if (type == "fixed_set") {
      FixedSetLoot set;
      for (const auto& t : j.at("templates")) {
        LootTemplate lt;
        lt.item.kind = loot_kind_from_string(t.at("kind").get<std::string>());
        lt.item.bonuses = AttributeVector::from_array(t.at("bonuses").get<std::array<int, 4>>());
        lt.weight = t.value("weight", 1.0);
        set.templates.push_back(lt);
      }
      if (j.contains("fallback")) set.fallback = ProceduralLoot{j["fallback"].at("attr_lo").get<int>(), j["fallback"].at("attr_hi").get<int>()};
      spec.dist = std::move(set);
    } else {
      throw Error(ErrorCode::InvalidSpec, "unknown loot spec type '" + type + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, std::string("malformed loot spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

json curriculum_to_json(const Curriculum& c) {
  json out = json::array();
  for (const auto& p : c) {
    out.push_back({{"until_episode", p.until_episode},
                   {"map_side", pair_json(p.map_side)},
                   {"n_impassable", pair_json(p.n_impassable)},
                   {"n_loot", {{"melee", pair_json(p.n_loot[0])}, {"ranged", pair_json(p.n_loot[1])}, {"potion", pair_json(p.n_loot[2])}}},
                   {"opponent_max_hp_scale", p.opponent_max_hp_scale}});
  }
  return out;
}

Curriculum curriculum_from_json(const json& j) {
  Curriculum c;
  for (const auto& p : j) {
    CurriculumPhase phase;
    phase.until_episode = p.at("until_episode").get<int>();
    phase.map_side = pair_from(p.at("map_side"));
    phase.n_impassable = pair_from(p.at("n_impassable"));
    phase.n_loot = {pair_from(p.at("n_loot").at("melee")), pair_from(p.at("n_loot").at("ranged")), pair_from(p.at("n_loot").at("potion"))};
    phase.opponent_max_hp_scale = p.value("opponent_max_hp_scale", 1.0);
    c.push_back(phase);
  }
  return c;
}

RunConfig parse_run_config(const json& doc) {
  const auto issues = validate(doc, run_config_schema());
  if (!issues.empty()) {
    std::ostringstream os;
    os << "config does not match the run-config schema:";
    for (const auto& i : issues) os << "\n  " << i.path << ": " << i.message;
    throw Error(ErrorCode::ConfigInvalid, os.str());
  }

  RunConfig rc;
  TrainConfig& t = rc.train;
  try {
    t.seed = doc.value("seed", std::uint64_t{0});
    if (doc.contains("frontend")) t.net.frontend = nn::frontend_from_string(doc["frontend"].get<std::string>());
    if (doc.contains("engine")) {
      t.max_steps = doc["engine"].value("max_steps", t.max_steps);
      t.max_hp = doc["engine"].value("max_hp", t.max_hp);
    }
    if (doc.contains("network")) {
      json net = doc["network"];
      net["frontend"] = to_string(t.net.frontend);
      t.net = nn::net_config_from_json(net);
    }
    if (doc.contains("train")) {
      const json& j = doc["train"];
      t.lr_policy = j.value("lr_policy", t.lr_policy);
      t.lr_baseline = j.value("lr_baseline", t.lr_baseline);
      t.clip_epsilon = j.value("clip_epsilon", t.clip_epsilon);
      t.gamma = j.value("gamma", t.gamma);
      t.episodes_per_update = j.value("episodes_per_update", t.episodes_per_update);
      t.epochs_per_update = j.value("epochs_per_update", t.epochs_per_update);
      t.minibatch_size = j.value("minibatch_size", t.minibatch_size);
      t.entropy_coef = j.value("entropy_coef", t.entropy_coef);
      t.total_episodes = j.value("total_episodes", t.total_episodes);
      if (j.contains("optimizer")) t.optimizer.kind = nn::optimizer_from_string(j["optimizer"].get<std::string>());
      if (j.contains("agent_class")) t.agent_class = npc_class_from_string(j["agent_class"].get<std::string>());
      if (j.contains("opponent_class")) t.opponent_class = npc_class_from_string(j["opponent_class"].get<std::string>());
      t.random_equipment = j.value("random_equipment", t.random_equipment);
      t.checkpoint_interval = j.value("checkpoint_interval", t.checkpoint_interval);
    }
    if (doc.contains("curriculum")) t.curriculum = curriculum_from_json(doc["curriculum"]);
    if (doc.contains("loot")) t.loot_spec = loot_spec_from_json(doc["loot"]);
    if (doc.contains("arena")) {
      const json& a = doc["arena"];
      rc.arena.episodes = a.value("episodes", rc.arena.episodes);
      if (a.contains("action_mode")) rc.arena.action_mode = action_mode_from_string(a["action_mode"].get<std::string>());
      if (a.contains("classes")) {
        rc.arena.classes.clear();
        for (const auto& c : a["classes"]) rc.arena.classes.push_back(npc_class_from_string(c.get<std::string>()));
      }
      if (a.contains("distributions")) {
        rc.arena.distributions.clear();
        for (const auto& d : a["distributions"]) rc.arena.distributions.emplace_back(d["name"].get<std::string>(), loot_spec_from_json(d["loot"]));
      }
      if (a.contains("pairings")) {
        for (const auto& p : a["pairings"]) rc.arena.pairings.push_back({p["name"], p["a"], p["b"]});
      }
    }
    if (doc.contains("output")) rc.out_dir = doc["output"].value("dir", rc.out_dir.string());
    t.validate();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigInvalid) throw;
    throw Error(ErrorCode::ConfigInvalid, std::string("config: ") + e.what());
  }
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot read config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigInvalid, path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(doc);
}

std::string substitute_class(const std::string& pattern, NpcClass c) {
  std::string out = pattern;
  const std::string token = "{class}";
  for (std::size_t at = out.find(token); at != std::string::npos; at = out.find(token, at)) {
    out.replace(at, token.size(), to_string(c));
  }
  return out;
}

}  // namespace lootcrawl::config
