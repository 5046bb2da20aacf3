//! Python bindings. Arrays cross the boundary as nested lists.

use std::f64::consts::FRAC_PI_2;

use drumhead_core as core;
use core::couplings::{self, OdfSpec};
use core::dynamics::{self, DEFAULT_SIZE_CAP};
use core::trap;
use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(drumhead, DrumheadError, PyRuntimeError);

fn to_py(e: core::Error) -> PyErr {
    match e {
        core::Error::InvalidParameter { .. } | core::Error::SizeCap { .. } => PyValueError::new_err(e.to_string()),
        _ => DrumheadError::new_err(e.to_string()),
    }
}

fn matrix_from_rows(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("coupling matrix must be square"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[pyclass(name = "TrapSpec", from_py_object)]
#[derive(Clone)]
struct PyTrapSpec(trap::TrapSpec);

#[pymethods]
impl PyTrapSpec {
    /// Defaults to ⁹Be⁺ at 4.46 T, f_z = 795 kHz, f_r = 45 kHz. Frequencies in rad/s.
    #[new]
    #[pyo3(signature = (ion_mass=None, ion_charge=None, b_field=None, omega_z=None, omega_r=None))]
    fn new(
        ion_mass: Option<f64>,
        ion_charge: Option<f64>,
        b_field: Option<f64>,
        omega_z: Option<f64>,
        omega_r: Option<f64>,
    ) -> PyResult<Self> {
        let d = trap::TrapSpec::default();
        let spec = trap::TrapSpec {
            ion_mass: ion_mass.unwrap_or(d.ion_mass),
            ion_charge: ion_charge.unwrap_or(d.ion_charge),
            b_field: b_field.unwrap_or(d.b_field),
            omega_z: omega_z.unwrap_or(d.omega_z),
            omega_r: omega_r.unwrap_or(d.omega_r),
        };
        spec.validate().map_err(to_py)?;
        Ok(Self(spec))
    }

    #[getter]
    fn ion_mass(&self) -> f64 {
        self.0.ion_mass
    }
    #[getter]
    fn ion_charge(&self) -> f64 {
        self.0.ion_charge
    }
    #[getter]
    fn b_field(&self) -> f64 {
        self.0.b_field
    }
    #[getter]
    fn omega_z(&self) -> f64 {
        self.0.omega_z
    }
    #[getter]
    fn omega_r(&self) -> f64 {
        self.0.omega_r
    }

    fn beta(&self) -> PyResult<f64> {
        trap::rotating_frame_beta(&self.0).map_err(to_py)
    }

    fn cyclotron_frequency(&self) -> f64 {
        trap::cyclotron_frequency(&self.0)
    }

    /// (axial_length, planar_length) in metres.
    fn characteristic_lengths(&self) -> PyResult<(f64, f64)> {
        let l = trap::characteristic_lengths(&self.0).map_err(to_py)?;
        Ok((l.axial_length, l.planar_length))
    }

    fn __repr__(&self) -> String {
        format!(
            "TrapSpec(ion_mass={:e}, ion_charge={:e}, b_field={}, omega_z={}, omega_r={})",
            self.0.ion_mass, self.0.ion_charge, self.0.b_field, self.0.omega_z, self.0.omega_r
        )
    }
}

#[pyclass(name = "OdfSpec", from_py_object)]
#[derive(Clone)]
struct PyOdfSpec(OdfSpec);

#[pymethods]
impl PyOdfSpec {
    #[new]
    #[pyo3(signature = (f0=None, mu_r=None, theta_r=None, optical_wavelength=None, temperature=None))]
    fn new(
        f0: Option<f64>,
        mu_r: Option<f64>,
        theta_r: Option<f64>,
        optical_wavelength: Option<f64>,
        temperature: Option<f64>,
    ) -> PyResult<Self> {
        let d = OdfSpec::default();
        let odf = OdfSpec {
            f0: f0.unwrap_or(d.f0),
            mu_r: mu_r.unwrap_or(d.mu_r),
            theta_r: theta_r.unwrap_or(d.theta_r),
            optical_wavelength: optical_wavelength.unwrap_or(d.optical_wavelength),
            temperature: temperature.unwrap_or(d.temperature),
            guard_band_rel: d.guard_band_rel,
        };
        odf.validate().map_err(to_py)?;
        Ok(Self(odf))
    }

    #[getter]
    fn f0(&self) -> f64 {
        self.0.f0
    }
    #[getter]
    fn mu_r(&self) -> f64 {
        self.0.mu_r
    }

    fn with_mu_r(&self, mu_r: f64) -> Self {
        Self(self.0.with_mu_r(mu_r))
    }

    /// λ_R = 2π/|Δk| in metres.
    fn effective_wavelength(&self) -> f64 {
        couplings::odf_wavevector(&self.0).lambda_r
    }
}

#[pyclass(name = "Crystal", frozen)]
struct PyCrystal(core::Crystal);

#[pymethods]
impl PyCrystal {
    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// [[x, y], ...] in metres.
    #[getter]
    fn positions(&self) -> Vec<[f64; 2]> {
        self.0.positions().to_vec()
    }

    #[getter]
    fn energy(&self) -> f64 {
        self.0.energy()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.0.iterations()
    }

    /// (min, median, max) nearest-neighbor distance in metres.
    fn nn_spacing(&self) -> PyResult<(f64, f64, f64)> {
        let s = core::nn_spacing_stats(&self.0).map_err(to_py)?;
        Ok((s.min, s.median, s.max))
    }

    fn modes(&self) -> PyResult<PyModeSpectrum> {
        core::mode_spectrum(&self.0).map(PyModeSpectrum).map_err(to_py)
    }
}

#[pyclass(name = "ModeSpectrum", frozen)]
struct PyModeSpectrum(core::ModeSpectrum);

#[pymethods]
impl PyModeSpectrum {
    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// Drumhead angular frequencies, descending.
    #[getter]
    fn frequencies(&self) -> Vec<f64> {
        self.0.frequencies().to_vec()
    }

    /// Row = ion, column = mode.
    #[getter]
    fn eigenvectors(&self) -> Vec<Vec<f64>> {
        rows_of(self.0.eigenvectors())
    }

    #[getter]
    fn com_index(&self) -> usize {
        self.0.com_index()
    }

    #[pyo3(signature = (odf=None))]
    fn couplings(&self, odf: Option<PyOdfSpec>) -> PyResult<PyCouplingMatrix> {
        let odf = odf.map_or_else(OdfSpec::default, |o| o.0);
        couplings::coupling_matrix(&self.0, &odf).map(PyCouplingMatrix).map_err(to_py)
    }

    /// Rows of (detuning, jbar, a) for μ_R = ω_z + detuning; failed rows carry NaN.
    #[pyo3(signature = (detunings, odf=None))]
    fn detuning_sweep(&self, detunings: Vec<f64>, odf: Option<PyOdfSpec>) -> Vec<(f64, f64, f64)> {
        let odf = odf.map_or_else(OdfSpec::default, |o| o.0);
        couplings::detuning_sweep(&self.0, &odf, &detunings)
            .into_iter()
            .map(|r| match r.result {
                Ok(p) => (r.detuning, p.jbar, p.power_law.map_or(f64::NAN, |f| f.a)),
                Err(_) => (r.detuning, f64::NAN, f64::NAN),
            })
            .collect()
    }
}

#[pyclass(name = "CouplingMatrix", frozen)]
struct PyCouplingMatrix(core::CouplingMatrix);

#[pymethods]
impl PyCouplingMatrix {
    #[new]
    #[pyo3(signature = (matrix, mu_r=0.0))]
    fn new(matrix: Vec<Vec<f64>>, mu_r: f64) -> PyResult<Self> {
        core::CouplingMatrix::new(matrix_from_rows(matrix)?, mu_r)
            .map(Self)
            .map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn matrix(&self) -> Vec<Vec<f64>> {
        rows_of(self.0.matrix())
    }

    #[getter]
    fn jbar(&self) -> f64 {
        self.0.jbar()
    }

    /// Fitted exponent a of J ∝ d^(−a), or None below three ions.
    #[getter]
    fn power_law_exponent(&self) -> Option<f64> {
        self.0.power_law().map(|f| f.a)
    }

    fn coefficient_of_variation(&self) -> f64 {
        self.0.coefficient_of_variation()
    }

    /// ⟨σ^x_j(t)⟩ from the product-of-cosines form, indexed [t][spin].
    #[pyo3(signature = (times, theta=FRAC_PI_2))]
    fn depolarization(&self, times: Vec<f64>, theta: f64) -> PyResult<Vec<Vec<f64>>> {
        dynamics::analytic_depolarization(&self.0, &times, theta).map_err(to_py)
    }

    /// Mean-field field B̄_j given each spin's ⟨σ^z⟩.
    fn mean_field(&self, z: Vec<f64>) -> PyResult<Vec<f64>> {
        dynamics::mean_field_field(&self.0, &z).map_err(to_py)
    }

    /// Exact statevector evolution; returns a dict with keys
    /// times, sx, sy, sz (each [t][spin]) and max_norm_drift.
    #[pyo3(signature = (times, theta=FRAC_PI_2, b_transverse=0.0, size_cap=DEFAULT_SIZE_CAP))]
    fn evolve<'py>(
        &self,
        py: Python<'py>,
        times: Vec<f64>,
        theta: f64,
        b_transverse: f64,
        size_cap: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let ev = py
            .detach(|| dynamics::exact_evolve(&self.0, b_transverse, theta, &times, size_cap))
            .map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("times", ev.times)?;
        d.set_item("sx", ev.sx)?;
        d.set_item("sy", ev.sy)?;
        d.set_item("sz", ev.sz)?;
        d.set_item("max_norm_drift", ev.max_norm_drift)?;
        Ok(d)
    }
}

/// Relaxes an n-ion planar crystal from a jittered triangular seed.
#[pyfunction]
#[pyo3(signature = (n, trap=None, seed=0))]
fn equilibrate(py: Python<'_>, n: usize, trap: Option<PyTrapSpec>, seed: u64) -> PyResult<PyCrystal> {
    let spec = trap.map_or_else(trap::TrapSpec::default, |t| t.0);
    py.detach(|| core::equilibrate(n, &spec, seed))
        .map(PyCrystal)
        .map_err(to_py)
}

/// Crystal from explicit positions [[x, y], ...] in metres.
#[pyfunction]
#[pyo3(signature = (positions, trap=None))]
fn crystal_from_positions(positions: Vec<[f64; 2]>, trap: Option<PyTrapSpec>) -> PyResult<PyCrystal> {
    let spec = trap.map_or_else(trap::TrapSpec::default, |t| t.0);
    core::Crystal::from_positions(positions, spec).map(PyCrystal).map_err(to_py)
}

/// Two-ion coupling from the closed two-mode sum, rad/s.
#[pyfunction]
#[pyo3(signature = (d, trap=None, odf=None))]
fn two_ion_coupling(d: f64, trap: Option<PyTrapSpec>, odf: Option<PyOdfSpec>) -> PyResult<f64> {
    let spec = trap.map_or_else(trap::TrapSpec::default, |t| t.0);
    let odf = odf.map_or_else(OdfSpec::default, |o| o.0);
    couplings::two_ion_closed_form(d, &spec, &odf).map_err(to_py)
}

#[pymodule]
fn drumhead(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTrapSpec>()?;
    m.add_class::<PyOdfSpec>()?;
    m.add_class::<PyCrystal>()?;
    m.add_class::<PyModeSpectrum>()?;
    m.add_class::<PyCouplingMatrix>()?;
    m.add_function(wrap_pyfunction!(equilibrate, m)?)?;
    m.add_function(wrap_pyfunction!(crystal_from_positions, m)?)?;
    m.add_function(wrap_pyfunction!(two_ion_coupling, m)?)?;
    m.add("DrumheadError", m.py().get_type::<DrumheadError>())?;
    Ok(())
}
