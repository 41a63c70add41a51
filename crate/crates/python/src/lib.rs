//! Python bindings: distribution families, the end-to-end fit, exact and
//! Monte Carlo transform moments, test signals and the replication harness.

use nefreg::bench::{self, normalize_signal, run_simulation, SimConfig, TestSignalKind};
use nefreg::diagnostics::exact_transform_moments;
use nefreg::estimator::{fit, FitConfig};
use nefreg::families::FamilyModel;
use nefreg::wavelet::WaveletFilter;
use nefreg::{mc_transform_moments, BinRegime, Error as CoreError};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn err(e: CoreError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A natural exponential family (or overdispersed mixture), parameterized by
/// its mean.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct Family {
    inner: FamilyModel,
}

#[pymethods]
impl Family {
    #[staticmethod]
    fn poisson() -> Self {
        Family { inner: FamilyModel::poisson() }
    }

    #[staticmethod]
    fn binomial(r: u32) -> PyResult<Self> {
        Ok(Family { inner: FamilyModel::binomial(r).map_err(err)? })
    }

    #[staticmethod]
    fn neg_binomial(r: f64) -> PyResult<Self> {
        Ok(Family { inner: FamilyModel::neg_binomial(r).map_err(err)? })
    }

    #[staticmethod]
    fn gamma(r: f64) -> PyResult<Self> {
        Ok(Family { inner: FamilyModel::gamma(r).map_err(err)? })
    }

    #[staticmethod]
    fn nef_ghs(r: f64) -> PyResult<Self> {
        Ok(Family { inner: FamilyModel::nef_ghs(r).map_err(err)? })
    }

    #[staticmethod]
    fn gamma_poisson(sigma: f64) -> PyResult<Self> {
        Ok(Family { inner: FamilyModel::gamma_poisson(sigma).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (r, k, sigma = 1.0))]
    fn beta_binomial(r: u32, k: f64, sigma: f64) -> PyResult<Self> {
        Ok(Family { inner: FamilyModel::beta_binomial(r, k, sigma).map_err(err)? })
    }

    fn mean_domain(&self) -> (f64, f64) {
        self.inner.mean_domain()
    }

    fn variance_at(&self, mu: f64) -> PyResult<f64> {
        self.inner.variance_at(mu).map_err(err)
    }

    /// The variance-stabilizing transform G at a mean value.
    fn g_apply(&self, mu: f64) -> PyResult<f64> {
        self.inner.g_apply(mu).map_err(err)
    }

    /// Total (clamping) inverse of G.
    fn g_inverse(&self, y: f64) -> f64 {
        self.inner.g_inverse(y)
    }

    /// The shifted transform H_m applied to a bin sum x of size m.
    fn hm_transform(&self, variant: &str, x: f64, m: f64) -> PyResult<f64> {
        let v = bench::parse_variant(variant).map_err(err)?;
        self.inner.hm_transform(v, x, m).map_err(err)
    }

    /// (a, b) of the shifted transform G((x + a)/(m + b)).
    fn vst_constants(&self, variant: &str) -> PyResult<(f64, f64)> {
        let v = bench::parse_variant(variant).map_err(err)?;
        let c = self.inner.vst_constants(v).map_err(err)?;
        Ok((c.a, c.b))
    }

    fn supports(&self, value: f64) -> bool {
        self.inner.supports(value)
    }

    fn is_discrete(&self) -> bool {
        self.inner.is_discrete()
    }

    /// n seeded draws at mean mu.
    fn sample(&self, mu: f64, n: usize, seed: u64) -> PyResult<Vec<f64>> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| self.inner.sample(mu, &mut rng).map_err(err))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("Family({:?})", self.inner.kind())
    }
}

/// Runs the bin / transform / shrink / invert pipeline on an ordered sample.
/// Returns a dict with grid, f_hat, g_hat, bin_count and clamp_events.
#[pyfunction]
#[pyo3(signature = (data, family, vst = "mm", rule = "blockjs", wavelet = "symmlet8",
                    regime = "qvf", j0 = None, t_override = None, target_per_bin = None,
                    noise_variance = None, block_length = None))]
#[allow(clippy::too_many_arguments)]
fn fit_curve<'py>(
    py: Python<'py>,
    data: Vec<f64>,
    family: &Family,
    vst: &str,
    rule: &str,
    wavelet: &str,
    regime: &str,
    j0: Option<usize>,
    t_override: Option<usize>,
    target_per_bin: Option<f64>,
    noise_variance: Option<f64>,
    block_length: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let variant = bench::parse_variant(vst).map_err(err)?;
    let shrink = bench::parse_rule(rule).map_err(err)?;
    let mut cfg = FitConfig::new(family.inner, variant, shrink);
    cfg.filter = WaveletFilter::by_name(wavelet).map_err(err)?;
    cfg.regime = match regime.to_ascii_lowercase().as_str() {
        "qvf" => BinRegime::Qvf,
        "gen" => BinRegime::GeneralNef,
        other => return Err(PyValueError::new_err(format!("bad regime `{other}`"))),
    };
    if let Some(j0) = j0 {
        cfg.j0 = j0;
    }
    cfg.t_override = t_override;
    cfg.target_per_bin = target_per_bin;
    cfg.noise_variance = noise_variance;
    cfg.block_length = block_length;
    let result = fit(&data, &cfg).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("bin_count", result.grid.len())?;
    out.set_item("grid", result.grid)?;
    out.set_item("f_hat", result.f_hat)?;
    out.set_item("g_hat", result.g_hat)?;
    out.set_item("clamp_events", result.clamp_events)?;
    Ok(out)
}

/// Exact mean, variance and truncation bound of the transformed bin sum.
#[pyfunction]
fn exact_moments(family: &Family, variant: &str, mu: f64, m: usize) -> PyResult<(f64, f64, f64)> {
    let v = bench::parse_variant(variant).map_err(err)?;
    let mom = exact_transform_moments(family.inner, v, mu, m).map_err(err)?;
    Ok((mom.mean, mom.variance, mom.truncation_bound))
}

/// Seeded Monte Carlo moments; variance is None for a single draw.
#[pyfunction]
fn mc_moments(
    family: &Family,
    variant: &str,
    mu: f64,
    m: usize,
    draws: usize,
    seed: u64,
) -> PyResult<(f64, Option<f64>)> {
    let v = bench::parse_variant(variant).map_err(err)?;
    mc_transform_moments(family.inner, v, mu, m, draws, seed).map_err(err)
}

/// A standard test signal sampled at the given points, affinely normalized
/// onto [lo, hi].
#[pyfunction]
fn test_signal(name: &str, points: Vec<f64>, lo: f64, hi: f64) -> PyResult<Vec<f64>> {
    let kind = TestSignalKind::by_name(name).map_err(err)?;
    let sig = normalize_signal(kind, lo, hi).map_err(err)?;
    points.iter().map(|&t| sig.eval(t).map_err(err)).collect()
}

/// Seeded replication study; returns the report serialized as JSON.
#[pyfunction]
#[pyo3(signature = (family, seed, signals = None, n_list = None, vsts = None,
                    rules = None, reps = 100))]
fn simulate(
    family: &Family,
    seed: u64,
    signals: Option<Vec<String>>,
    n_list: Option<Vec<usize>>,
    vsts: Option<Vec<String>>,
    rules: Option<Vec<String>>,
    reps: usize,
) -> PyResult<String> {
    let mut cfg = SimConfig::new(family.inner, seed);
    if let Some(signals) = signals {
        cfg.signals = signals
            .iter()
            .map(|s| TestSignalKind::by_name(s).map_err(err))
            .collect::<PyResult<_>>()?;
    }
    if let Some(n_list) = n_list {
        cfg.n_list = n_list;
    }
    if let Some(vsts) = vsts {
        cfg.variants = vsts
            .iter()
            .map(|s| bench::parse_variant(s).map_err(err))
            .collect::<PyResult<_>>()?;
    }
    if let Some(rules) = rules {
        cfg.rules = rules
            .iter()
            .map(|s| bench::parse_rule(s).map_err(err))
            .collect::<PyResult<_>>()?;
    }
    cfg.replications = reps;
    let report = run_simulation(&cfg).map_err(err)?;
    serde_json::to_string_pretty(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn _nefreg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Family>()?;
    m.add_function(wrap_pyfunction!(fit_curve, m)?)?;
    m.add_function(wrap_pyfunction!(exact_moments, m)?)?;
    m.add_function(wrap_pyfunction!(mc_moments, m)?)?;
    m.add_function(wrap_pyfunction!(test_signal, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
