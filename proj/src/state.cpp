#include "stfmri/state.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "stfmri/io.hpp"

namespace stfmri {

namespace fs = std::filesystem;

namespace {

bool same(double a, double b) {
    return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

bool same(const MatrixXd& a, const MatrixXd& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           (a.size() == 0 || std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
}

bool same_list(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!same(a[i], b[i])) return false;
    }
    return true;
}

bool same_model(const RoiCovModel& a, const RoiCovModel& b) {
    if (a.family != b.family || !(a.partition.assignment == b.partition.assignment) ||
        a.partition.centroids.size() != b.partition.centroids.size() || a.params.size() != b.params.size()) {
        return false;
    }
    for (std::size_t l = 0; l < a.partition.centroids.size(); ++l) {
        if (!same(MatrixXd(a.partition.centroids[l]), MatrixXd(b.partition.centroids[l]))) return false;
    }
    for (std::size_t l = 0; l < a.params.size(); ++l) {
        const AnisoParams& p = a.params[l];
        const AnisoParams& q = b.params[l];
        if (!same_list({p.nu, p.theta, p.lengths[0], p.lengths[1], p.lengths[2], p.xi1, p.xi2},
                  {q.nu, q.theta, q.lengths[0], q.lengths[1], q.lengths[2], q.xi1, q.xi2})) {
            return false;
        }
    }
    return same(a.omega, b.omega) && same(a.sigma1, b.sigma1) && same(a.loglik, b.loglik) && same(a.jitter, b.jitter);
}

}  // namespace

bool TemporalStage::operator==(const TemporalStage& o) const {
    if (fits.size() != o.fits.size() || !same(residuals, o.residuals)) return false;
    for (std::size_t i = 0; i < fits.size(); ++i) {
        const VoxelFit& a = fits[i];
        const VoxelFit& b = o.fits[i];
        if (!same(MatrixXd(a.beta), MatrixXd(b.beta)) ||
            !same_list({a.ar.phi1, a.ar.phi2, a.ar.sigma2, a.loglik}, {b.ar.phi1, b.ar.phi2, b.ar.sigma2, b.loglik})) {
            return false;
        }
    }
    return true;
}

bool RoiLocalFit::operator==(const RoiLocalFit& o) const {
    return config == o.config && same(bic, o.bic) && same(model_bic, o.model_bic) && visited == o.visited &&
           same_model(model, o.model) && same(delta, o.delta) && same(delta_closed_form, o.delta_closed_form) &&
           same(shrunk, o.shrunk);
}

bool RegionalStage::operator==(const RegionalStage& o) const {
    return same(A, o.A) && same(glasso.W, o.glasso.W) && same(glasso.lambda, o.glasso.lambda) &&
           glasso.nnz_offdiag == o.glasso.nnz_offdiag && same(glasso.objective, o.glasso.objective) &&
           glasso.sweeps == o.glasso.sweeps && same(cv.lambda_hat, o.cv.lambda_hat) && same_list(cv.lambdas, o.cv.lambdas) &&
           same_list(cv.sse, o.cv.sse) && cv.nnz == o.cv.nnz && cv.test_columns == o.cv.test_columns;
}

bool ActivationStage::operator==(const ActivationStage& o) const {
    if (fit.rois.size() != o.fit.rois.size() || fit.voxels.size() != o.fit.voxels.size() || fit.reject != o.fit.reject) {
        return false;
    }
    for (std::size_t r = 0; r < fit.rois.size(); ++r) {
        const auto& a = fit.rois[r];
        const auto& b = o.fit.rois[r];
        if (a.labels != b.labels || !same(MatrixXd(a.theta), MatrixXd(b.theta)) || !same(a.cov, b.cov)) return false;
    }
    for (std::size_t v = 0; v < fit.voxels.size(); ++v) {
        const auto& a = fit.voxels[v];
        const auto& b = o.fit.voxels[v];
        if (!same_list({a.contrast, a.se, a.z, a.p}, {b.contrast, b.se, b.z, b.p})) return false;
    }
    return true;
}

void FitState::validate() const {
    if (local && !temporal) {
        throw StateError("state has a fit-local record without the fit-temporal record it depends on");
    }
    if (regional && !local) {
        throw StateError("state has a fit-regional record without the fit-local record it depends on");
    }
    if (activation && !local) {
        throw StateError("state has a test-activation record without the fit-local record it depends on");
    }
}

bool FitState::operator==(const FitState& o) const {
    return provenance == o.provenance && temporal == o.temporal && local == o.local && regional == o.regional &&
           activation == o.activation;
}

// -------------------------------------------------------------------------
// Serialization
// -------------------------------------------------------------------------

namespace {

std::vector<double> to_vector(const VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

VectorXd from_vector(const std::vector<double>& v) {
    VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
    return out;
}

void write_temporal(const TemporalStage& s, const fs::path& dir) {
    const Eigen::Index V = static_cast<Eigen::Index>(s.fits.size());
    const Eigen::Index k = V ? s.fits.front().beta.size() : 0;
    MatrixXd table(V, k + 4);
    for (Eigen::Index v = 0; v < V; ++v) {
        const VoxelFit& f = s.fits[v];
        if (f.beta.size() != k) {
            throw StateError("voxel fits have inconsistent coefficient counts");
        }
        table.row(v).head(k) = f.beta.transpose();
        table(v, k) = f.ar.phi1;
        table(v, k + 1) = f.ar.phi2;
        table(v, k + 2) = f.ar.sigma2;
        table(v, k + 3) = f.loglik;
    }
    io::write_matrix(dir, "voxel_fits", table);
    io::write_matrix(dir, "residuals", s.residuals);
}

TemporalStage read_temporal(const fs::path& dir) {
    TemporalStage s;
    const MatrixXd table = io::read_matrix(dir, "voxel_fits");
    if (table.cols() < 4) {
        throw StateError("corrupt voxel_fits table in " + dir.string());
    }
    const Eigen::Index k = table.cols() - 4;
    for (Eigen::Index v = 0; v < table.rows(); ++v) {
        VoxelFit f;
        f.beta = table.row(v).head(k).transpose();
        f.ar = {table(v, k), table(v, k + 1), table(v, k + 2)};
        f.loglik = table(v, k + 3);
        s.fits.push_back(std::move(f));
    }
    s.residuals = io::read_matrix(dir, "residuals");
    return s;
}

void write_local(const LocalStage& s, const fs::path& dir) {
    io::KeyValues meta;
    meta.set("rois", static_cast<long long>(s.rois.size()));
    meta.save(dir / "local.txt");
    for (std::size_t r = 0; r < s.rois.size(); ++r) {
        const RoiLocalFit& f = s.rois[r];
        const fs::path sub = dir / ("roi_" + std::to_string(r + 1));
        fs::create_directories(sub);
        io::KeyValues kv;
        kv.set("grid", std::vector<int>{f.config.lx, f.config.ly, f.config.lz});
        kv.set("bic", f.bic);
        kv.set("model_bic", f.model_bic);
        kv.set("visited", f.visited);
        kv.set("family", to_string(f.model.family));
        kv.set("omega", f.model.omega);
        kv.set("loglik", f.model.loglik);
        kv.set("jitter", f.model.jitter);
        kv.set("assignment", f.model.partition.assignment);
        std::vector<double> centroids;
        for (const Vector3d& c : f.model.partition.centroids) {
            centroids.insert(centroids.end(), {c[0], c[1], c[2]});
        }
        kv.set("centroids", centroids);
        std::vector<double> params;
        for (const AnisoParams& p : f.model.params) {
            params.insert(params.end(), {p.nu, p.theta, p.lengths[0], p.lengths[1], p.lengths[2], p.xi1, p.xi2});
        }
        kv.set("params", params);
        kv.set("delta", f.delta);
        kv.set("delta_closed_form", f.delta_closed_form);
        kv.save(sub / "model.txt");
        io::write_matrix(sub, "sigma1", f.model.sigma1);
        io::write_matrix(sub, "shrunk", f.shrunk);
    }
}

LocalStage read_local(const fs::path& dir) {
    const io::KeyValues meta = io::KeyValues::load(dir / "local.txt");
    LocalStage s;
    const long long R = meta.get_int("rois");
    for (long long r = 0; r < R; ++r) {
        const fs::path sub = dir / ("roi_" + std::to_string(r + 1));
        const io::KeyValues kv = io::KeyValues::load(sub / "model.txt");
        RoiLocalFit f;
        const auto grid = kv.get_ints("grid");
        if (grid.size() != 3) throw StateError("corrupt grid entry in " + sub.string());
        f.config = {grid[0], grid[1], grid[2]};
        f.bic = kv.get_double("bic");
        f.model_bic = kv.get_double("model_bic");
        f.visited = static_cast<int>(kv.get_int("visited"));
        f.model.family = cov_family_from_string(kv.get("family"));
        f.model.omega = kv.get_double("omega");
        f.model.loglik = kv.get_double("loglik");
        f.model.jitter = kv.get_double("jitter");
        f.model.partition.assignment = kv.get_ints("assignment");
        const auto centroids = kv.get_doubles("centroids");
        const auto params = kv.get_doubles("params");
        if (centroids.size() % 3 != 0 || params.size() != centroids.size() / 3 * 7) {
            throw StateError("corrupt model parameters in " + sub.string());
        }
        for (std::size_t l = 0; l < centroids.size() / 3; ++l) {
            f.model.partition.centroids.emplace_back(centroids[3 * l], centroids[3 * l + 1], centroids[3 * l + 2]);
            const double* p = params.data() + 7 * l;
            AnisoParams a;
            a.nu = p[0];
            a.theta = p[1];
            a.lengths = {p[2], p[3], p[4]};
            a.xi1 = p[5];
            a.xi2 = p[6];
            f.model.params.push_back(a);
        }
        f.delta = kv.get_double("delta");
        f.delta_closed_form = kv.get_double("delta_closed_form");
        f.model.sigma1 = io::read_matrix(sub, "sigma1");
        f.shrunk = io::read_matrix(sub, "shrunk");
        s.rois.push_back(std::move(f));
    }
    return s;
}

void write_regional(const RegionalStage& s, const fs::path& dir) {
    io::write_matrix(dir, "A", s.A);
    io::write_matrix(dir, "W", s.glasso.W);
    io::KeyValues kv;
    kv.set("lambda", s.glasso.lambda);
    kv.set("nnz_offdiag", s.glasso.nnz_offdiag);
    kv.set("objective", s.glasso.objective);
    kv.set("sweeps", s.glasso.sweeps);
    kv.set("cv_lambda_hat", s.cv.lambda_hat);
    kv.set("cv_lambdas", s.cv.lambdas);
    kv.set("cv_sse", s.cv.sse);
    kv.set("cv_nnz", s.cv.nnz);
    kv.set("cv_test_columns", s.cv.test_columns);
    kv.save(dir / "regional.txt");
}

RegionalStage read_regional(const fs::path& dir) {
    RegionalStage s;
    s.A = io::read_matrix(dir, "A");
    s.glasso.W = io::read_matrix(dir, "W");
    const io::KeyValues kv = io::KeyValues::load(dir / "regional.txt");
    s.glasso.lambda = kv.get_double("lambda");
    s.glasso.nnz_offdiag = static_cast<int>(kv.get_int("nnz_offdiag"));
    s.glasso.objective = kv.get_double("objective");
    s.glasso.sweeps = static_cast<int>(kv.get_int("sweeps"));
    s.cv.lambda_hat = kv.get_double("cv_lambda_hat");
    s.cv.lambdas = kv.get_doubles("cv_lambdas");
    s.cv.sse = kv.get_doubles("cv_sse");
    s.cv.nnz = kv.get_ints("cv_nnz");
    s.cv.test_columns = kv.get_ints("cv_test_columns");
    return s;
}

void write_activation(const ActivationStage& s, const fs::path& dir) {
    const Eigen::Index V = static_cast<Eigen::Index>(s.fit.voxels.size());
    MatrixXd table(V, 4);
    std::vector<int> reject;
    for (Eigen::Index v = 0; v < V; ++v) {
        const VoxelTest& t = s.fit.voxels[v];
        table.row(v) << t.contrast, t.se, t.z, t.p;
        reject.push_back(s.fit.reject.at(v) ? 1 : 0);
    }
    io::write_matrix(dir, "voxel_tests", table);
    io::KeyValues kv;
    kv.set("rois", static_cast<long long>(s.fit.rois.size()));
    kv.set("reject", reject);
    for (std::size_t r = 0; r < s.fit.rois.size(); ++r) {
        const RoiActivation& a = s.fit.rois[r];
        std::string labels;
        for (const auto& l : a.labels) {
            labels += (labels.empty() ? "" : " ") + l;
        }
        kv.set("roi_" + std::to_string(r + 1) + "_labels", labels);
        kv.set("roi_" + std::to_string(r + 1) + "_theta", to_vector(a.theta));
        io::write_matrix(dir, "roi_" + std::to_string(r + 1) + "_cov", a.cov);
    }
    kv.save(dir / "activation.txt");
}

ActivationStage read_activation(const fs::path& dir) {
    ActivationStage s;
    const MatrixXd table = io::read_matrix(dir, "voxel_tests");
    if (table.cols() != 4) throw StateError("corrupt voxel_tests table in " + dir.string());
    const io::KeyValues kv = io::KeyValues::load(dir / "activation.txt");
    const auto reject = kv.get_ints("reject");
    if (static_cast<Eigen::Index>(reject.size()) != table.rows()) {
        throw StateError("reject flags and voxel tests differ in length in " + dir.string());
    }
    for (Eigen::Index v = 0; v < table.rows(); ++v) {
        s.fit.voxels.push_back({table(v, 0), table(v, 1), table(v, 2), table(v, 3)});
        s.fit.reject.push_back(reject[v] != 0);
    }
    const long long R = kv.get_int("rois");
    for (long long r = 1; r <= R; ++r) {
        RoiActivation a;
        std::istringstream in(kv.get("roi_" + std::to_string(r) + "_labels"));
        std::string label;
        while (in >> label) a.labels.push_back(label);
        a.theta = from_vector(kv.get_doubles("roi_" + std::to_string(r) + "_theta"));
        a.cov = io::read_matrix(dir, "roi_" + std::to_string(r) + "_cov");
        s.fit.rois.push_back(std::move(a));
    }
    return s;
}

template <class Writer>
void write_stage_atomically(const fs::path& dir, const std::string& name, Writer&& writer) {
    const fs::path final_dir = dir / name;
    const fs::path tmp = dir / (".tmp-" + name);
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    writer(tmp);
    fs::remove_all(final_dir);
    fs::rename(tmp, final_dir);
}

}  // namespace

void save_state(const FitState& state, const fs::path& dir) {
    state.validate();
    fs::create_directories(dir);
    // Stages that are absent in `state` must not survive from an older run.
    if (!state.activation) fs::remove_all(dir / "activation");
    if (!state.regional) fs::remove_all(dir / "regional");
    if (!state.local) fs::remove_all(dir / "local");
    if (!state.temporal) fs::remove_all(dir / "temporal");

    io::KeyValues prov;
    prov.set("format_version", kStateFormatVersion);
    prov.set("seed", std::to_string(state.provenance.seed));
    prov.set("config_hash", state.provenance.config_hash);
    prov.save(dir / "provenance.tmp");
    fs::rename(dir / "provenance.tmp", dir / "provenance.txt");

    if (state.temporal) write_stage_atomically(dir, "temporal", [&](const fs::path& p) { write_temporal(*state.temporal, p); });
    if (state.local) write_stage_atomically(dir, "local", [&](const fs::path& p) { write_local(*state.local, p); });
    if (state.regional) write_stage_atomically(dir, "regional", [&](const fs::path& p) { write_regional(*state.regional, p); });
    if (state.activation) {
        write_stage_atomically(dir, "activation", [&](const fs::path& p) { write_activation(*state.activation, p); });
    }
}

FitState load_state(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw StateError("no state directory at " + dir.string());
    }
    FitState s;
    try {
        const io::KeyValues prov = io::KeyValues::load(dir / "provenance.txt");
        const long long version = prov.get_int("format_version");
        if (version != kStateFormatVersion) {
            throw StateError("state format version " + std::to_string(version) + " is not supported (expected " +
                             std::to_string(kStateFormatVersion) + ")");
        }
        s.provenance.seed = std::stoull(prov.get("seed"));
        s.provenance.config_hash = prov.has("config_hash") ? prov.get("config_hash") : "";
        if (fs::is_directory(dir / "temporal")) s.temporal = read_temporal(dir / "temporal");
        if (fs::is_directory(dir / "local")) s.local = read_local(dir / "local");
        if (fs::is_directory(dir / "regional")) s.regional = read_regional(dir / "regional");
        if (fs::is_directory(dir / "activation")) s.activation = read_activation(dir / "activation");
    } catch (const StateError&) {
        throw;
    } catch (const std::exception& e) {
        throw StateError("corrupt state in " + dir.string() + ": " + e.what());
    }
    s.validate();
    return s;
}

}  // namespace stfmri
