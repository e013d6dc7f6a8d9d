#include "ncfilter.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "ncfilter/scenario.hpp"

struct ncf_config {
  ncfilter::ScenarioConfig cfg;
};

struct ncf_table {
  ncfilter::Table table;
};

struct ncf_report {
  ncfilter::OracleReport report;
  std::string text;
};

namespace {

thread_local std::string g_last_error;

ncf_status to_status(ncfilter::ErrorCode code) {
  switch (code) {
    case ncfilter::ErrorCode::invalid_argument: return NCF_ERR_INVALID_ARGUMENT;
    case ncfilter::ErrorCode::config: return NCF_ERR_CONFIG;
    case ncfilter::ErrorCode::numeric: return NCF_ERR_NUMERIC;
    case ncfilter::ErrorCode::io: return NCF_ERR_IO;
    case ncfilter::ErrorCode::verification: return NCF_ERR_VERIFY_FAILED;
    case ncfilter::ErrorCode::internal: return NCF_ERR_INTERNAL;
  }
  return NCF_ERR_INTERNAL;
}

template <class Fn>
ncf_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return NCF_OK;
  } catch (const ncfilter::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return NCF_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return NCF_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return NCF_ERR_INTERNAL;
  }
}

ncf_status null_arg(const char* what) {
  g_last_error = std::string(what) + " must not be NULL";
  return NCF_ERR_INVALID_ARGUMENT;
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

}  // namespace

extern "C" {

const char* ncf_version(void) { return NCFILTER_VERSION; }

const char* ncf_last_error(void) { return g_last_error.c_str(); }

ncf_status ncf_config_parse(const char* json_text, ncf_config** out) {
  if (!json_text || !out) return null_arg("json_text and out");
  return guarded([&] { *out = new ncf_config{ncfilter::parse_config(json_text)}; });
}

ncf_status ncf_config_preset(const char* name, ncf_config** out) {
  if (!name || !out) return null_arg("name and out");
  return guarded([&] { *out = new ncf_config{ncfilter::preset(name)}; });
}

ncf_status ncf_config_load(const char* preset_or_path, ncf_config** out) {
  if (!preset_or_path || !out) return null_arg("preset_or_path and out");
  return guarded([&] { *out = new ncf_config{ncfilter::load_config(preset_or_path)}; });
}

ncf_status ncf_config_set_grid(ncf_config* cfg, double dt, double T) {
  if (!cfg) return null_arg("cfg");
  return guarded([&] {
    const double new_dt = dt > 0.0 ? dt : cfg->cfg.dt;
    const double new_T = T > 0.0 ? T : cfg->cfg.T;
    ncfilter::TimeGrid::make(new_dt, new_T);  // validates
    cfg->cfg.dt = new_dt;
    cfg->cfg.T = new_T;
  });
}

ncf_status ncf_config_set_ensemble_size(ncf_config* cfg, int64_t M) {
  if (!cfg) return null_arg("cfg");
  return guarded([&] {
    if (M <= 0) return;
    if (M > 100000000)
      ncfilter::fail(ncfilter::ErrorCode::invalid_argument, "M is too large");
    cfg->cfg.M = static_cast<int>(M);
  });
}

ncf_status ncf_config_set_seed(ncf_config* cfg, uint64_t master_seed) {
  if (!cfg) return null_arg("cfg");
  cfg->cfg.master_seed = master_seed;
  g_last_error.clear();
  return NCF_OK;
}

ncf_status ncf_config_set_output(ncf_config* cfg, const char* path,
                                 const char* format) {
  if (!cfg) return null_arg("cfg");
  return guarded([&] {
    if (format) {
      const std::string f(format);
      if (f != "csv" && f != "json")
        ncfilter::fail(ncfilter::ErrorCode::invalid_argument,
                       "format must be csv or json");
      cfg->cfg.format = f;
    }
    if (path) cfg->cfg.out_path = path;
  });
}

const char* ncf_config_name(const ncf_config* cfg) {
  return cfg ? cfg->cfg.name.c_str() : "";
}

ncf_status ncf_config_to_json(const ncf_config* cfg, char** out) {
  if (!cfg || !out) return null_arg("cfg and out");
  return guarded([&] { *out = dup_string(ncfilter::to_json(cfg->cfg)); });
}

ncf_status ncf_config_hash(const ncf_config* cfg, uint64_t* out) {
  if (!cfg || !out) return null_arg("cfg and out");
  return guarded([&] { *out = ncfilter::config_hash(cfg->cfg); });
}

void ncf_config_free(ncf_config* cfg) { delete cfg; }

void ncf_string_free(char* s) { std::free(s); }

ncf_status ncf_run(const ncf_config* cfg, ncf_table** out) {
  if (!cfg || !out) return null_arg("cfg and out");
  return guarded([&] { *out = new ncf_table{ncfilter::run_scenario(cfg->cfg)}; });
}

ncf_status ncf_trajectories(const ncf_config* cfg, int threads, ncf_table** out) {
  if (!cfg || !out) return null_arg("cfg and out");
  return guarded(
      [&] { *out = new ncf_table{ncfilter::run_trajectories(cfg->cfg, threads)}; });
}

size_t ncf_table_rows(const ncf_table* t) { return t ? t->table.rows() : 0; }

size_t ncf_table_columns(const ncf_table* t) {
  return t ? t->table.columns.size() : 0;
}

const char* ncf_table_column_name(const ncf_table* t, size_t col) {
  if (!t || col >= t->table.columns.size()) return nullptr;
  return t->table.columns[col].c_str();
}

const double* ncf_table_column(const ncf_table* t, size_t col) {
  if (!t || col >= t->table.data.size()) return nullptr;
  return t->table.data[col].data();
}

size_t ncf_table_warning_count(const ncf_table* t) {
  return t ? t->table.warnings.size() : 0;
}

const char* ncf_table_warning(const ncf_table* t, size_t i) {
  if (!t || i >= t->table.warnings.size()) return nullptr;
  return t->table.warnings[i].c_str();
}

ncf_status ncf_write_outputs(const ncf_config* cfg, const ncf_table* t,
                             char** written_path) {
  if (!cfg || !t) return null_arg("cfg and table");
  return guarded([&] {
    const std::string path = ncfilter::write_outputs(cfg->cfg, t->table);
    if (written_path) *written_path = dup_string(path);
  });
}

void ncf_table_free(ncf_table* t) { delete t; }

ncf_status ncf_verify(const ncf_config* cfg, int seeds, ncf_report** out) {
  if (!cfg || !out) return null_arg("cfg and out");
  return guarded([&] {
    auto* r = new ncf_report{ncfilter::compare_oracle(cfg->cfg, seeds > 0 ? seeds : 3), {}};
    r->text = r->report.text();
    *out = r;
  });
}

int ncf_report_passed(const ncf_report* r) {
  return r && r->report.passed() ? 1 : 0;
}

const char* ncf_report_text(const ncf_report* r) {
  return r ? r->text.c_str() : "";
}

void ncf_report_free(ncf_report* r) { delete r; }

}  // extern "C"
