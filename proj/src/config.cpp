#include "boostfgl/config.hpp"

#include <fstream>

namespace boostfgl {

nlohmann::json synth_to_json(const SynthConfig& s) {
    nlohmann::json j;
    j["num_nodes"] = s.num_nodes;
    j["num_classes"] = s.num_classes;
    j["priors"] = s.priors;
    j["feature_dim"] = s.feature_dim;
    j["noise_scale"] = s.noise_scale;
    j["intra_prob"] = s.intra_prob;
    j["inter_prob"] = s.inter_prob;
    j["edge_prob_overrides"] = nlohmann::json::array();
    for (const auto& [a, b, p] : s.edge_prob_overrides) {
        j["edge_prob_overrides"].push_back({{"a", a}, {"b", b}, {"p", p}});
    }
    j["class_mean_scale"] = s.class_mean_scale;
    j["class_means"] = s.class_means;
    j["class_noise_scale"] = s.class_noise_scale;
    j["class_feature_mask_prob"] = s.class_feature_mask_prob;
    j["train_label_noise"] = s.train_label_noise;
    j["train_label_noise_classes"] = s.train_label_noise_classes;
    j["train_ratio"] = s.train_ratio;
    j["val_ratio"] = s.val_ratio;
    j["test_ratio"] = s.test_ratio;
    return j;
}

SynthConfig synth_from_json(const nlohmann::json& j) {
    SynthConfig s;
    s.num_nodes = j.value("num_nodes", s.num_nodes);
    s.num_classes = j.value("num_classes", s.num_classes);
    s.priors = j.value("priors", s.priors);
    s.feature_dim = j.value("feature_dim", s.feature_dim);
    s.noise_scale = j.value("noise_scale", s.noise_scale);
    s.intra_prob = j.value("intra_prob", s.intra_prob);
    s.inter_prob = j.value("inter_prob", s.inter_prob);
    if (j.contains("edge_prob_overrides")) {
        for (const auto& o : j.at("edge_prob_overrides")) {
            s.edge_prob_overrides.emplace_back(o.at("a").get<int>(),
                                               o.at("b").get<int>(),
                                               o.at("p").get<double>());
        }
    }
    s.class_mean_scale = j.value("class_mean_scale", s.class_mean_scale);
    s.class_means = j.value("class_means", s.class_means);
    s.class_noise_scale = j.value("class_noise_scale", s.class_noise_scale);
    s.class_feature_mask_prob =
        j.value("class_feature_mask_prob", s.class_feature_mask_prob);
    s.train_label_noise = j.value("train_label_noise", s.train_label_noise);
    s.train_label_noise_classes =
        j.value("train_label_noise_classes", s.train_label_noise_classes);
    s.train_ratio = j.value("train_ratio", s.train_ratio);
    s.val_ratio = j.value("val_ratio", s.val_ratio);
    s.test_ratio = j.value("test_ratio", s.test_ratio);
    return s;
}

namespace {

nlohmann::json round_to_json(const RoundConfig& r) {
    nlohmann::json j;
    j["rounds"] = r.rounds;
    j["local_epochs"] = r.local_epochs;
    j["participation"] = r.participation;
    j["method"] = r.method == Method::FedAvg ? "fedavg" : "boostfgl";
    j["node_boost"] = r.node_boost;
    j["topo_boost"] = r.topo_boost;
    j["model_boost"] = r.model_boost;
    if (r.dp) {
        j["dp"] = {{"clip_norm", r.dp->clip_norm}, {"noise_std", r.dp->noise_std}};
    } else {
        j["dp"] = nullptr;
    }
    j["parallel_clients"] = r.parallel_clients;
    j["diagnostics"] = r.diagnostics;
    j["khop_max"] = r.khop_max;
    return j;
}

RoundConfig round_from_json(const nlohmann::json& j) {
    RoundConfig r;
    r.rounds = j.value("rounds", r.rounds);
    r.local_epochs = j.value("local_epochs", r.local_epochs);
    r.participation = j.value("participation", r.participation);
    std::string method = j.value("method", std::string("boostfgl"));
    if (method == "fedavg") r.method = Method::FedAvg;
    else if (method == "boostfgl") r.method = Method::BoostFgl;
    else throw ConfigError("unknown method '" + method + "'");
    r.node_boost = j.value("node_boost", r.node_boost);
    r.topo_boost = j.value("topo_boost", r.topo_boost);
    r.model_boost = j.value("model_boost", r.model_boost);
    if (j.contains("dp") && !j.at("dp").is_null()) {
        DpConfig dp;
        dp.clip_norm = j.at("dp").value("clip_norm", dp.clip_norm);
        dp.noise_std = j.at("dp").value("noise_std", dp.noise_std);
        r.dp = dp;
    }
    r.parallel_clients = j.value("parallel_clients", r.parallel_clients);
    r.diagnostics = j.value("diagnostics", r.diagnostics);
    r.khop_max = j.value("khop_max", r.khop_max);
    return r;
}

nlohmann::json hyper_to_json(const HyperParams& h) {
    nlohmann::json j;
    j["mu"] = h.mu;
    j["lambda_n"] = h.lambda_n;
    j["lambda_e"] = h.lambda_e;
    j["lambda_s"] = h.lambda_s;
    j["gamma"] = h.gamma;
    j["trust_form"] =
        h.trust_form == TrustForm::Rational ? "rational" : "exponential";
    j["prune"] = {{"enabled", h.prune.enabled},
                  {"tau", h.prune.tau},
                  {"budget", h.prune.budget}};
    j["hidden"] = h.hidden;
    j["dropout"] = h.dropout;
    j["optimizer"] = {
        {"kind", h.optimizer.kind == OptimizerKind::Adam ? "adam" : "sgd"},
        {"lr", h.optimizer.lr},
        {"weight_decay", h.optimizer.weight_decay}};
    return j;
}

HyperParams hyper_from_json(const nlohmann::json& j) {
    HyperParams h;
    h.mu = j.value("mu", h.mu);
    h.lambda_n = j.value("lambda_n", h.lambda_n);
    h.lambda_e = j.value("lambda_e", h.lambda_e);
    h.lambda_s = j.value("lambda_s", h.lambda_s);
    h.gamma = j.value("gamma", h.gamma);
    std::string form = j.value("trust_form", std::string("rational"));
    if (form == "rational") h.trust_form = TrustForm::Rational;
    else if (form == "exponential") h.trust_form = TrustForm::Exponential;
    else throw ConfigError("unknown trust_form '" + form + "'");
    if (j.contains("prune")) {
        h.prune.enabled = j.at("prune").value("enabled", h.prune.enabled);
        h.prune.tau = j.at("prune").value("tau", h.prune.tau);
        h.prune.budget = j.at("prune").value("budget", h.prune.budget);
    }
    h.hidden = j.value("hidden", h.hidden);
    h.dropout = j.value("dropout", h.dropout);
    if (j.contains("optimizer")) {
        const auto& o = j.at("optimizer");
        std::string kind = o.value("kind", std::string("adam"));
        if (kind == "adam") h.optimizer.kind = OptimizerKind::Adam;
        else if (kind == "sgd") h.optimizer.kind = OptimizerKind::Sgd;
        else throw ConfigError("unknown optimizer kind '" + kind + "'");
        h.optimizer.lr = o.value("lr", h.optimizer.lr);
        h.optimizer.weight_decay =
            o.value("weight_decay", h.optimizer.weight_decay);
    }
    return h;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (!(q > 0.0 && q < 1.0)) throw ConfigError("q must lie in (0, 1)");
    if (tau_h < 0.0 || tau_h > 1.0) throw ConfigError("tau_h must lie in [0, 1]");
    if (clients < 1) throw ConfigError("clients must be >= 1");
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    if (use_synth) synth.validate();
    round.validate();
    if (hyper.mu <= 0.0 || hyper.mu > 1.0) {
        throw ConfigError("mu must lie in (0, 1]");
    }
    if (hyper.lambda_n < 0 || hyper.lambda_e < 0 || hyper.lambda_s < 0 ||
        hyper.gamma < 0) {
        throw ConfigError("boosting strengths must be nonnegative");
    }
    if (hyper.dropout < 0.0 || hyper.dropout >= 1.0) {
        throw ConfigError("dropout must lie in [0, 1)");
    }
    if (hyper.hidden < 1) throw ConfigError("hidden dim must be >= 1");
    if (hyper.optimizer.lr < 0.0) throw ConfigError("lr must be >= 0");
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j;
    if (use_synth) {
        j["graph"] = {{"synth", synth_to_json(synth)}};
    } else {
        j["graph"] = {{"path", graph_path}};
    }
    j["q"] = q;
    j["tau_h"] = tau_h;
    j["clients"] = clients;
    j["rounds"] = round_to_json(round);
    j["hyper"] = hyper_to_json(hyper);
    j["seeds"] = seeds;
    j["out_dir"] = out_dir;
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    if (j.contains("graph")) {
        const auto& g = j.at("graph");
        if (g.contains("path")) {
            c.use_synth = false;
            c.graph_path = g.at("path").get<std::string>();
        } else if (g.contains("synth")) {
            c.use_synth = true;
            c.synth = synth_from_json(g.at("synth"));
        } else {
            throw ConfigError("graph config needs either 'path' or 'synth'");
        }
    }
    c.q = j.value("q", c.q);
    c.tau_h = j.value("tau_h", c.tau_h);
    c.clients = j.value("clients", c.clients);
    if (j.contains("rounds")) c.round = round_from_json(j.at("rounds"));
    if (j.contains("hyper")) c.hyper = hyper_from_json(j.at("hyper"));
    if (j.contains("seeds")) {
        c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    }
    c.out_dir = j.value("out_dir", c.out_dir);
    c.validate();
    return c;
}

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("malformed JSON in " + path + ": " + e.what());
    }
}

void apply_override(nlohmann::json& config, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("--set expects key=value, got '" + assignment + "'");
    }
    std::string key = assignment.substr(0, eq);
    std::string value = assignment.substr(eq + 1);

    std::string pointer = "/";
    for (char ch : key) pointer += ch == '.' ? '/' : ch;

    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::parse_error&) {
        parsed = value;  // bare strings like method=fedavg
    }
    try {
        config[nlohmann::json::json_pointer(pointer)] = parsed;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cannot apply override '" + assignment + "': " +
                          e.what());
    }
}

}  // namespace boostfgl
