// tools/msfser_cli.cpp

// Copyright 2026 The msfser Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "msfser/msfser.h"

namespace {

// Non-zero status carried out of a command body.
struct Exit {
  int code;
};

void Check(msfser_status s) {
  if (s == MSFSER_OK) return;
  std::cerr << "msfser: " << msfser_last_error() << "\n";
  throw Exit{msfser_exit_code(s)};
}

[[noreturn]] void InputError(const std::string &msg) {
  std::cerr << "msfser: " << msg << "\n";
  throw Exit{2};
}

// Owns a string returned by the library.
std::string Take(char *s) {
  std::string out = s == nullptr ? std::string() : std::string(s);
  msfser_string_free(s);
  return out;
}

void WriteText(const std::string &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) InputError("cannot write " + path);
  out << text;
  if (!out) InputError("write failed: " + path);
}

std::string ReadText(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) InputError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string Join(const std::string &dir, const std::string &name) {
  if (dir.empty()) return name;
  return dir.back() == '/' ? dir + name : dir + "/" + name;
}

std::string Stem(const std::string &path) {
  std::string base = path.substr(path.find_last_of('/') + 1);
  const std::size_t dot = base.find_last_of('.');
  return dot == std::string::npos || dot == 0 ? base : base.substr(0, dot);
}

template <typename T, void (*Free)(T *)>
struct Handle {
  T *p = nullptr;
  Handle() = default;
  Handle(const Handle &) = delete;
  Handle &operator=(const Handle &) = delete;
  ~Handle() { Free(p); }
};

using Config = Handle<msfser_config, msfser_config_free>;
using TextGrid = Handle<msfser_textgrid, msfser_textgrid_free>;
using Audio = Handle<msfser_audio, msfser_audio_free>;
using Lemf = Handle<msfser_lemf, msfser_lemf_free>;
using Dataset = Handle<msfser_dataset, msfser_dataset_free>;
using Model = Handle<msfser_model, msfser_model_free>;

// Every config key becomes a flag (underscores turn into dashes); flags
// override the --config file, which overrides built-in defaults.
struct Overrides {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;
  std::map<std::string, CLI::Option *> options;
};

void AddConfigOptions(CLI::App *cmd, Overrides &ov, const nlohmann::json &defaults) {
  cmd->add_option("--config", ov.config_file, "flat JSON config file")->check(CLI::ExistingFile);
  CLI::App *group = cmd->add_option_group("Config", "settings also accepted in the config file");
  for (auto it = defaults.begin(); it != defaults.end(); ++it) {
    const std::string key = it.key();
    std::string flag = "--" + key;
    for (char &c : flag)
      if (c == '_') c = '-';
    if (it.value().is_boolean()) {
      ov.options[key] = group->add_flag(flag, ov.flags[key], key);
    } else {
      std::string desc = key + " (default " + it.value().dump() + ")";
      ov.options[key] = group->add_option(flag, ov.values[key], desc);
    }
  }
}

void BuildConfig(const Overrides &ov, Config &cfg) {
  Check(msfser_config_create(&cfg.p));
  if (!ov.config_file.empty()) Check(msfser_config_merge_file(cfg.p, ov.config_file.c_str()));
  for (const auto &[key, opt] : ov.options) {
    if (opt->count() == 0) continue;
    auto flag = ov.flags.find(key);
    const std::string value =
        flag != ov.flags.end() ? (flag->second ? "true" : "false") : ov.values.at(key);
    Check(msfser_config_set(cfg.p, key.c_str(), value.c_str()));
  }
  Check(msfser_config_validate(cfg.p));
}

std::string Setting(const Config &cfg, const char *key) {
  nlohmann::json j = nlohmann::json::parse(Take([&] {
    char *s = nullptr;
    Check(msfser_config_to_json(cfg.p, &s));
    return s;
  }()));
  const nlohmann::json &v = j.at(key);
  return v.is_string() ? v.get<std::string>() : v.dump();
}

std::string RequireSetting(const Config &cfg, const char *key) {
  std::string v = Setting(cfg, key);
  if (v.empty()) {
    std::string flag = std::string("--") + key;
    for (char &c : flag)
      if (c == '_') c = '-';
    InputError(flag + " is required");
  }
  return v;
}

int Main(int argc, char **argv) {
  nlohmann::json defaults;
  {
    Config base;
    Check(msfser_config_create(&base.p));
    char *s = nullptr;
    Check(msfser_config_to_json(base.p, &s));
    defaults = nlohmann::json::parse(Take(s));
  }

  CLI::App app{"Prosodic emphasis detection and multi-granularity emotion regression"};
  app.require_subcommand(1);
  app.set_version_flag("--version", msfser_version());

  // emphasis
  Overrides emph_ov;
  std::string emph_audio, emph_tg, emph_id;
  bool emph_svg = false;
  CLI::App *emphasis = app.add_subcommand("emphasis", "word prosody, emphasis segment and plot data");
  emphasis->add_option("--audio", emph_audio, "mono WAV file")->required();
  emphasis->add_option("--textgrid", emph_tg, "aligned TextGrid with a words tier")->required();
  emphasis->add_option("--utt-id", emph_id, "id used in output names (default: audio file stem)");
  emphasis->add_flag("--svg", emph_svg, "also write an SVG chart");
  AddConfigOptions(emphasis, emph_ov, defaults);

  // synth
  Overrides synth_ov;
  CLI::App *synth = app.add_subcommand("synth", "generate a synthetic corpus");
  AddConfigOptions(synth, synth_ov, defaults);

  // train
  Overrides train_ov;
  std::string loss_csv;
  CLI::App *train = app.add_subcommand("train", "train on the train split and write a checkpoint");
  train->add_option("--loss-csv", loss_csv, "loss history (default: <checkpoint>.loss.csv)");
  AddConfigOptions(train, train_ov, defaults);

  // eval
  Overrides eval_ov;
  std::string eval_split = "test", eval_report;
  CLI::App *eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--split", eval_split, "train, test or all")->check(CLI::IsMember({"train", "test", "all"}));
  eval->add_option("--report", eval_report, "also write the report JSON here");
  AddConfigOptions(eval, eval_ov, defaults);

  // embed
  Overrides embed_ov;
  std::string embed_input, embed_channel = "gs", embed_output;
  CLI::App *embed = app.add_subcommand("embed", "toy-embed id<TAB>text lines into JSON-lines records");
  embed->add_option("--input", embed_input, "TSV file of id<TAB>text")->required();
  embed->add_option("--channel", embed_channel, "les, gs or es")->check(CLI::IsMember({"les", "gs", "es"}));
  embed->add_option("--output", embed_output, "output path (default: stdout)");
  AddConfigOptions(embed, embed_ov, defaults);

  // textgrid-check
  std::vector<std::string> tg_files;
  CLI::App *tg_check = app.add_subcommand("textgrid-check", "parse TextGrids and report their tiers");
  tg_check->add_option("files", tg_files, "TextGrid files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (emphasis->parsed()) {
    Config cfg;
    BuildConfig(emph_ov, cfg);
    Audio audio;
    TextGrid tg;
    Check(msfser_textgrid_read(emph_tg.c_str(), &tg.p));
    Check(msfser_audio_read(emph_audio.c_str(), &audio.p));
    Lemf res;
    Check(msfser_lemf_run(cfg.p, audio.p, tg.p, &res.p));
    const std::string id = emph_id.empty() ? Stem(emph_audio) : emph_id;
    const std::string dir = Setting(cfg, "out_dir").empty() ? "." : Setting(cfg, "out_dir");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) InputError("cannot create " + dir + ": " + ec.message());
    char *s = nullptr;
    Check(msfser_lemf_json(res.p, id.c_str(), &s));
    WriteText(Join(dir, id + ".lemf.json"), Take(s));
    Check(msfser_lemf_f0_csv(res.p, &s));
    WriteText(Join(dir, id + ".f0.csv"), Take(s));
    Check(msfser_lemf_energy_csv(res.p, &s));
    WriteText(Join(dir, id + ".energy.csv"), Take(s));
    Check(msfser_lemf_words_csv(res.p, &s));
    WriteText(Join(dir, id + ".words.csv"), Take(s));
    if (emph_svg) {
      Check(msfser_lemf_svg(res.p, id.c_str(), &s));
      WriteText(Join(dir, id + ".svg"), Take(s));
    }
    Check(msfser_lemf_segment_text(res.p, &s));
    std::cout << id << ": " << Take(s) << "\n";
    return 0;
  }

  if (synth->parsed()) {
    Config cfg;
    BuildConfig(synth_ov, cfg);
    const std::string out = RequireSetting(cfg, "out_dir");
    Check(msfser_synth(cfg.p, out.c_str()));
    std::cout << "wrote " << Setting(cfg, "n_utterances") << " utterances to " << out << "\n";
    return 0;
  }

  if (train->parsed()) {
    Config cfg;
    BuildConfig(train_ov, cfg);
    const std::string data = RequireSetting(cfg, "data_dir");
    const std::string ckpt = RequireSetting(cfg, "checkpoint");
    Dataset ds;
    Check(msfser_dataset_load(cfg.p, data.c_str(), "train", &ds.p));
    Model model;
    Check(msfser_model_create(cfg.p, ds.p, &model.p));
    char *history = nullptr;
    Check(msfser_model_train(model.p, cfg.p, ds.p, &history));
    const std::string csv = Take(history);
    Check(msfser_model_save(model.p, ckpt.c_str()));
    WriteText(loss_csv.empty() ? ckpt + ".loss.csv" : loss_csv, csv);
    std::cout << "trained " << msfser_model_parameter_count(model.p) << " parameters on "
              << msfser_dataset_size(ds.p) << " utterances; checkpoint " << ckpt << "\n";
    return 0;
  }

  if (eval->parsed()) {
    Config cfg;
    BuildConfig(eval_ov, cfg);
    const std::string data = RequireSetting(cfg, "data_dir");
    const std::string ckpt = RequireSetting(cfg, "checkpoint");
    Model model;
    Check(msfser_model_load(ckpt.c_str(), &model.p));
    Dataset ds;
    Check(msfser_dataset_load(cfg.p, data.c_str(), eval_split.c_str(), &ds.p));
    char *s = nullptr;
    Check(msfser_model_evaluate(model.p, ds.p, &s));
    const std::string report = Take(s);
    if (!eval_report.empty()) WriteText(eval_report, report);
    std::cout << report;
    return 0;
  }

  if (embed->parsed()) {
    Config cfg;
    BuildConfig(embed_ov, cfg);
    const std::string tsv = ReadText(embed_input);
    char *s = nullptr;
    Check(msfser_embed_lines(cfg.p, tsv.c_str(), embed_channel.c_str(), &s));
    const std::string jsonl = Take(s);
    if (embed_output.empty()) std::cout << jsonl;
    else WriteText(embed_output, jsonl);
    return 0;
  }

  if (tg_check->parsed()) {
    for (const std::string &path : tg_files) {
      TextGrid tg;
      const msfser_status st = msfser_textgrid_read(path.c_str(), &tg.p);
      if (st != MSFSER_OK) {
        std::cerr << "msfser: " << path << ": " << msfser_last_error() << "\n";
        return msfser_exit_code(st);
      }
      char *s = nullptr;
      Check(msfser_textgrid_report(tg.p, &s));
      std::cout << path << "\n" << Take(s);
    }
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char **argv) {
  try {
    return Main(argc, argv);
  } catch (const Exit &e) {
    return e.code;
  } catch (const std::exception &e) {
    std::cerr << "msfser: " << e.what() << "\n";
    return 2;
  }
}
