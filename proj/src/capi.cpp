#include "isingmarket/isingmarket.h"

#include <exception>
#include <memory>
#include <string>

#include "isingmarket/evaluation.hpp"
#include "isingmarket/io.hpp"
#include "isingmarket/pipeline.hpp"

struct im_config {
  im::RunConfig cfg;
};

struct im_params {
  im::IsingParams params;
};

struct im_panel {
  im::ReturnPanel panel;
};

namespace {

thread_local std::string last_error;

im_status fail(im_status s, const char* what) {
  last_error = what;
  return s;
}

template <class F>
im_status guarded(F&& f) {
  try {
    last_error.clear();
    f();
    return IM_OK;
  } catch (const im::Error& e) {
    return fail(static_cast<im_status>(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(IM_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(IM_ERR_INTERNAL, e.what());
  }
}

void need(const void* p, const char* what) {
  if (!p) throw im::ConfigError(std::string(what) + " must not be NULL");
}

void copy_matrix(const im::Matrix& m, double* out) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) *out++ = m(i, j);
}

}  // namespace

extern "C" {

const char* im_version(void) { return im::version(); }
const char* im_last_error(void) { return last_error.c_str(); }

im_status im_config_create(im_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new im_config();
  });
}

void im_config_destroy(im_config* cfg) { delete cfg; }

im_status im_config_set(im_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    need(cfg, "cfg");
    need(key, "key");
    need(value, "value");
    cfg->cfg.set(key, value);
  });
}

im_status im_config_load_file(im_config* cfg, const char* path) {
  return guarded([&] {
    need(cfg, "cfg");
    need(path, "path");
    cfg->cfg.load_file(path);
  });
}

size_t im_config_key_count(void) { return im::RunConfig::keys().size(); }
const char* im_config_key(size_t i) {
  const auto& k = im::RunConfig::keys();
  return i < k.size() ? k[i].c_str() : nullptr;
}
size_t im_command_count(void) { return im::commands().size(); }
const char* im_command_name(size_t i) {
  const auto& c = im::commands();
  return i < c.size() ? c[i].c_str() : nullptr;
}

im_status im_run_command(const im_config* cfg, const char* command) {
  int rc = 0;
  const im_status s = guarded([&] {
    need(cfg, "cfg");
    need(command, "command");
    rc = im::run_command(command, cfg->cfg);
  });
  if (s != IM_OK) return s;
  if (rc != 0) return fail(static_cast<im_status>(rc), "some windows did not converge");
  return IM_OK;
}

im_status im_params_create(size_t n, const double* h, const double* J, im_params** out) {
  return guarded([&] {
    need(h, "h");
    need(J, "J");
    need(out, "out");
    const auto e = static_cast<Eigen::Index>(n);
    im::Vector hv = Eigen::Map<const im::Vector>(h, e);
    im::Matrix Jm = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(J, e, e);
    auto p = std::make_unique<im_params>();
    p->params = im::IsingParams(hv, Jm);
    p->params.validate();
    *out = p.release();
  });
}

im_status im_params_load(const char* path, im_params** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    auto p = std::make_unique<im_params>();
    p->params = im::io::read_params(path);
    *out = p.release();
  });
}

im_status im_params_save(const im_params* p, const char* path) {
  return guarded([&] {
    need(p, "params");
    need(path, "path");
    im::io::write_params(path, p->params);
  });
}

void im_params_destroy(im_params* p) { delete p; }

size_t im_params_size(const im_params* p) { return p ? p->params.size() : 0; }

im_status im_params_get(const im_params* p, double* h, double* J) {
  return guarded([&] {
    need(p, "params");
    if (h)
      for (size_t i = 0; i < p->params.size(); ++i) h[i] = p->params.h(static_cast<Eigen::Index>(i));
    if (J) copy_matrix(p->params.J, J);
  });
}

im_status im_params_hamiltonian(const im_params* p, const int8_t* s, double* energy) {
  return guarded([&] {
    need(p, "params");
    need(s, "s");
    need(energy, "energy");
    for (size_t i = 0; i < p->params.size(); ++i)
      if (s[i] != 1 && s[i] != -1) throw im::ConfigError("spins must be +1 or -1");
    *energy = im::hamiltonian(p->params, std::span<const std::int8_t>(s, p->params.size()));
  });
}

im_status im_params_sample(const im_params* p, size_t sweeps, size_t chains, uint64_t seed, double* means,
                           double* pairs) {
  return guarded([&] {
    need(p, "params");
    im::McSettings mc;
    mc.sweeps = sweeps;
    mc.chains = chains;
    mc.seed = seed;
    const auto s = im::metropolis_sample(p->params, mc);
    if (means) copy_matrix(s.means, means);
    if (pairs) copy_matrix(s.pair_moments, pairs);
  });
}

im_status im_params_exact_moments(const im_params* p, double* means, double* pairs) {
  return guarded([&] {
    need(p, "params");
    const auto s = im::exact_moments_small(p->params);
    if (means) copy_matrix(s.means, means);
    if (pairs) copy_matrix(s.pair_moments, pairs);
  });
}

im_status im_params_energy_split(const im_params* p, const double* m, double* e_ext, double* e_int) {
  return guarded([&] {
    need(p, "params");
    need(m, "m");
    const auto e = im::energy_split(p->params, Eigen::Map<const im::Vector>(m, static_cast<Eigen::Index>(p->params.size())));
    if (e_ext) *e_ext = e.e_ext;
    if (e_int) *e_int = e.e_int;
  });
}

im_status im_panel_load_prices(const char* path, im_panel** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    auto p = std::make_unique<im_panel>();
    p->panel = im::log_returns(im::read_prices_csv(path));
    *out = p.release();
  });
}

void im_panel_destroy(im_panel* panel) { delete panel; }
size_t im_panel_series(const im_panel* panel) { return panel ? panel->panel.series() : 0; }
size_t im_panel_length(const im_panel* panel) { return panel ? panel->panel.length() : 0; }

im_status im_panel_binarize(im_panel* panel) {
  return guarded([&] {
    need(panel, "panel");
    if (panel->panel.kind != im::ReturnKind::Binary) panel->panel = im::binarize(panel->panel);
  });
}

im_status im_panel_values(const im_panel* panel, double* out) {
  return guarded([&] {
    need(panel, "panel");
    need(out, "out");
    copy_matrix(panel->panel.values, out);
  });
}

im_status im_infer_window(const im_panel* binary, size_t last, size_t size, const char* method, const im_config* cfg,
                          im_params** out, int* converged) {
  return guarded([&] {
    need(binary, "panel");
    need(method, "method");
    need(out, "out");
    if (binary->panel.kind != im::ReturnKind::Binary) throw im::ConfigError("inference needs a binarized panel");
    if (size == 0 || last >= binary->panel.length() || last + 1 < size)
      throw im::ConfigError("window does not fit inside the panel");
    im::InferenceConfig ic = cfg ? cfg->cfg.inference : im::InferenceConfig{};
    ic.method = im::parse_method(method);
    std::vector<std::size_t> rows(binary->panel.series());
    for (size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    auto r = im::infer_rows(binary->panel, rows, last, size, ic);
    if (converged) *converged = r.converged ? 1 : 0;
    auto p = std::make_unique<im_params>();
    p->params = std::move(r.params);
    *out = p.release();
  });
}

im_status im_mst_q(const im_params* p, const int* sector_ids, size_t sector_count, double* q) {
  return guarded([&] {
    need(p, "params");
    need(sector_ids, "sector_ids");
    need(q, "q");
    std::vector<int> ids(sector_ids, sector_ids + p->params.size());
    for (const int id : ids)
      if (id < 0 || static_cast<size_t>(id) >= sector_count) throw im::ConfigError("sector id out of range");
    *q = im::analyze_mst(p->params.J, ids, sector_count).q;
  });
}

}  // extern "C"
