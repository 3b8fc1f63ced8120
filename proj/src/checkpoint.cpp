#include "vqacoin/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"
#include "vqacoin/error.hpp"

namespace vqacoin::checkpoint {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'V', 'Q', 'C', 'K'};
constexpr uint32_t kVersion = 1;

json config_to_json(const ModelConfig& c) {
  return json{{"d_image", c.d_image},
              {"d_q_large", c.d_q_large},
              {"d_q_small", c.d_q_small},
              {"embed_dim", c.embed_dim},
              {"n_q_max", c.n_q_max},
              {"si_max", c.si_max},
              {"glimpses_image", c.glimpses_image},
              {"glimpses_si", c.glimpses_si},
              {"answer_count", c.answer_count},
              {"d_attn", c.d_attn},
              {"d_cls_hidden", c.d_cls_hidden},
              {"dropout_classifier", c.dropout_classifier},
              {"dropout_fc", c.dropout_fc},
              {"softmax_loss", c.softmax_loss}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.d_image = j.at("d_image").get<size_t>();
  c.d_q_large = j.at("d_q_large").get<size_t>();
  c.d_q_small = j.at("d_q_small").get<size_t>();
  c.embed_dim = j.at("embed_dim").get<size_t>();
  c.n_q_max = j.at("n_q_max").get<size_t>();
  c.si_max = j.at("si_max").get<size_t>();
  c.glimpses_image = j.at("glimpses_image").get<size_t>();
  c.glimpses_si = j.at("glimpses_si").get<size_t>();
  c.answer_count = j.at("answer_count").get<size_t>();
  c.d_attn = j.at("d_attn").get<size_t>();
  c.d_cls_hidden = j.at("d_cls_hidden").get<size_t>();
  c.dropout_classifier = j.at("dropout_classifier").get<double>();
  c.dropout_fc = j.at("dropout_fc").get<double>();
  c.softmax_loss = j.at("softmax_loss").get<bool>();
  return c;
}

json manifest_of(const std::vector<std::pair<std::string, Tensor>>& tensors) {
  json m = json::array();
  for (const auto& [name, t] : tensors) {
    json shape = json::array();
    for (size_t i = 0; i < t.rank(); ++i) shape.push_back(t.dim(i));
    m.push_back({{"name", name}, {"shape", shape}});
  }
  return m;
}

void write_tensors(std::ofstream& out,
                   const std::vector<std::pair<std::string, Tensor>>& tensors) {
  for (const auto& [name, t] : tensors)
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

std::vector<std::pair<std::string, Tensor>> read_tensors(std::ifstream& in, const json& manifest,
                                                         const std::string& path) {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const json& rec : manifest) {
    std::vector<size_t> shape;
    for (const json& d : rec.at("shape")) shape.push_back(d.get<size_t>());
    Tensor t = Tensor::zeros(shape);
    in.read(reinterpret_cast<char*>(t.data().data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!in) throw data_error(path + ": truncated tensor payload");
    out.emplace_back(rec.at("name").get<std::string>(), std::move(t));
  }
  return out;
}

}  // namespace

void save(const std::string& path, const Checkpoint& ck) {
  json header{{"config", config_to_json(ck.cfg)},
              {"vocab", ck.vocab_tokens},
              {"answers", ck.answer_tokens},
              {"tensors", manifest_of(ck.tensors)}};
  if (ck.has_optimizer) {
    header["optimizer"] = {{"step", ck.step},
                           {"epochs_done", ck.epochs_done},
                           {"m", manifest_of(ck.opt_m)},
                           {"u", manifest_of(ck.opt_u)}};
  }
  std::string hs = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path);
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
  uint64_t hlen = hs.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof hlen);
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  write_tensors(out, ck.tensors);
  if (ck.has_optimizer) {
    write_tensors(out, ck.opt_m);
    write_tensors(out, ck.opt_u);
  }
  if (!out) throw io_error("write failed for " + path);
}

Checkpoint load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw data_error(path + ": not a checkpoint (bad magic)");
  uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  if (!in || version != kVersion)
    throw data_error(path + ": unsupported checkpoint version " + std::to_string(version));
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof hlen);
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw data_error(path + ": truncated header");

  json header;
  try {
    header = json::parse(hs);
  } catch (const json::parse_error& e) {
    throw data_error(path + ": corrupt header: " + e.what());
  }

  Checkpoint ck;
  ck.cfg = config_from_json(header.at("config"));
  ck.vocab_tokens = header.at("vocab").get<std::vector<std::string>>();
  ck.answer_tokens = header.at("answers").get<std::vector<std::string>>();
  ck.tensors = read_tensors(in, header.at("tensors"), path);
  if (header.contains("optimizer")) {
    const json& opt = header["optimizer"];
    ck.has_optimizer = true;
    ck.step = opt.at("step").get<size_t>();
    ck.epochs_done = opt.at("epochs_done").get<size_t>();
    ck.opt_m = read_tensors(in, opt.at("m"), path);
    ck.opt_u = read_tensors(in, opt.at("u"), path);
  }
  return ck;
}

Checkpoint from_model(const model::VqaCoinModel& m) {
  Checkpoint ck;
  ck.cfg = m.cfg;
  ck.vocab_tokens = m.vocab.id_to_token;
  ck.answer_tokens = m.answers.id_to_answer;
  for (const auto& p : m.params()) ck.tensors.emplace_back(p.name, p.var->value);
  return ck;
}

model::VqaCoinModel to_model(const Checkpoint& ck) {
  model::VqaCoinModel m = model::VqaCoinModel::init(
      ck.cfg, textprep::Vocabulary::from_tokens(ck.vocab_tokens),
      textprep::AnswerSet::from_answers(ck.answer_tokens), /*seed=*/0);
  std::vector<layers::NamedParam> params = m.params();
  if (params.size() != ck.tensors.size())
    throw data_error("checkpoint holds " + std::to_string(ck.tensors.size()) +
                     " tensors, model expects " + std::to_string(params.size()));
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& [name, t] = ck.tensors[i];
    if (name != params[i].name)
      throw data_error("checkpoint tensor " + std::to_string(i) + " is \"" + name +
                       "\", model expects \"" + params[i].name + "\"");
    if (!t.same_shape(params[i].var->value))
      throw data_error("checkpoint tensor \"" + name + "\" has shape " + t.shape_str() +
                       ", model expects " + params[i].var->value.shape_str());
    params[i].var->value = t;
  }
  return m;
}

void check_config_match(const ModelConfig& stored, const ModelConfig& requested) {
  json a = config_to_json(stored);
  json b = config_to_json(requested);
  for (auto it = a.begin(); it != a.end(); ++it) {
    if (b.at(it.key()) != it.value())
      throw config_error("checkpoint config mismatch on \"" + it.key() + "\": checkpoint has " +
                         it.value().dump() + ", run config has " + b.at(it.key()).dump());
  }
}

}  // namespace vqacoin::checkpoint
