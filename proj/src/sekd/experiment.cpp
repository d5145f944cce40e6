#include "hvqa/sekd/experiment.hpp"

#include "hvqa/common.hpp"

namespace hvqa::sekd {

using json = nlohmann::json;

namespace {

template <typename T>
void read(const json& obj, const char* key, T& field) {
    if (obj.contains(key)) field = obj.at(key).get<T>();
}

const json& section(const json& doc, const char* name) {
    static const json kEmpty = json::object();
    if (!doc.contains(name)) return kEmpty;
    if (!doc.at(name).is_object()) throw ConfigError(std::string("config: '") + name + "' must be an object");
    return doc.at(name);
}

}  // namespace

ExperimentConfig experiment_from_json(const json& doc) {
    ExperimentConfig c;
    try {
        if (!doc.is_object()) throw ConfigError("config: top level must be an object");
        const json& w = section(doc, "world");
        read(w, "depth", c.world.depth);
        read(w, "feature_dim", c.world.feature_dim);
        read(w, "embed_dim", c.world.embed_dim);
        read(w, "signal", c.world.signal);
        read(w, "noise_scale", c.world.noise_scale);
        read(w, "shared_fraction", c.world.shared_fraction);
        read(w, "seed", c.world.seed);

        const json& p = section(doc, "pretrain");
        read(p, "steps", c.pretrain.steps);
        read(p, "batch_size", c.pretrain.batch_size);
        read(p, "lr", c.pretrain.lr);
        read(p, "weight_decay", c.pretrain.weight_decay);
        read(p, "seed", c.pretrain.seed);
        read(p, "hidden_dim", c.pretrain.shape.hidden_dim);

        const json& d = section(doc, "distill");
        read(d, "epochs", c.distill.epochs);
        read(d, "batch_size", c.distill.batch_size);
        read(d, "train_size", c.distill.train_size);
        read(d, "val_size", c.distill.val_size);
        read(d, "per_level_projector", c.distill.per_level_projector);
        read(d, "lr", c.distill.optimizer.lr);
        read(d, "beta1", c.distill.optimizer.beta1);
        read(d, "beta2", c.distill.optimizer.beta2);
        read(d, "weight_decay", c.distill.optimizer.weight_decay);
        read(d, "warmup_fraction", c.distill.optimizer.warmup_fraction);
        read(d, "clip_norm", c.distill.optimizer.clip_norm);
        read(d, "cosine", c.distill.optimizer.cosine);

        const json& l = section(doc, "weights");
        read(l, "lambda_hard", c.distill.weights.lambda_hard);
        read(l, "lambda_soft", c.distill.weights.lambda_soft);
        read(l, "lambda_feat", c.distill.weights.lambda_feat);
        read(l, "kd_temperature", c.distill.weights.kd_temperature);

        if (doc.contains("seeds")) c.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    try {
        c.distill.weights.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (c.seeds.empty()) throw ConfigError("config: seeds must not be empty");
    return c;
}

json experiment_to_json(const ExperimentConfig& c) {
    json doc;
    doc["world"] = {{"depth", c.world.depth},
                    {"feature_dim", c.world.feature_dim},
                    {"embed_dim", c.world.embed_dim},
                    {"signal", c.world.signal},
                    {"noise_scale", c.world.noise_scale},
                    {"shared_fraction", c.world.shared_fraction},
                    {"seed", c.world.seed}};
    doc["pretrain"] = {{"steps", c.pretrain.steps},
                       {"batch_size", c.pretrain.batch_size},
                       {"lr", c.pretrain.lr},
                       {"weight_decay", c.pretrain.weight_decay},
                       {"seed", c.pretrain.seed},
                       {"hidden_dim", c.pretrain.shape.hidden_dim}};
    doc["distill"] = {{"epochs", c.distill.epochs},
                      {"batch_size", c.distill.batch_size},
                      {"train_size", c.distill.train_size},
                      {"val_size", c.distill.val_size},
                      {"per_level_projector", c.distill.per_level_projector},
                      {"lr", c.distill.optimizer.lr},
                      {"beta1", c.distill.optimizer.beta1},
                      {"beta2", c.distill.optimizer.beta2},
                      {"weight_decay", c.distill.optimizer.weight_decay},
                      {"warmup_fraction", c.distill.optimizer.warmup_fraction},
                      {"clip_norm", c.distill.optimizer.clip_norm},
                      {"cosine", c.distill.optimizer.cosine}};
    doc["weights"] = {{"lambda_hard", c.distill.weights.lambda_hard},
                      {"lambda_soft", c.distill.weights.lambda_soft},
                      {"lambda_feat", c.distill.weights.lambda_feat},
                      {"kd_temperature", c.distill.weights.kd_temperature}};
    doc["seeds"] = c.seeds;
    return doc;
}

}  // namespace hvqa::sekd
