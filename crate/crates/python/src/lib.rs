//! Python bindings for robust-bounds.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ::robust_bounds::discretise::{lift_error, stages};
use ::robust_bounds::marginals::{self, DiscreteMarginal, PutPriceCurve};
use ::robust_bounds::paths::GridPath;
use ::robust_bounds::problem::{run_bounds, ProblemSpec};
use ::robust_bounds::rational::{format_q, q_to_f64};
use ::robust_bounds::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InternalConsistency(_) | Error::Construction(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Primal, dual and gap rows `(quantity, value, status)` for a JSON problem
/// spec.
#[pyfunction]
#[pyo3(signature = (spec_json, tolerance=None))]
fn bounds(spec_json: &str, tolerance: Option<f64>) -> PyResult<Vec<(String, f64, String)>> {
    let spec = ProblemSpec::from_json(spec_json).map_err(py_err)?;
    let (_, out) = run_bounds(&spec, tolerance).map_err(py_err)?;
    Ok(out.rows.into_iter().map(|r| (r.quantity, r.value, r.status)).collect())
}

/// Exact discretisation at mesh `2^-n`.
#[pyclass(frozen, get_all)]
struct Discretised {
    /// Jump times as exact `p/q` strings.
    jump_times: Vec<String>,
    values: Vec<Vec<String>>,
    terminal: Vec<String>,
    naive_error: f64,
    hat_error: f64,
    lift_error: f64,
}

#[pymethods]
impl Discretised {
    fn __repr__(&self) -> String {
        format!("Discretised(steps={}, hat_error={})", self.jump_times.len(), self.hat_error)
    }
}

#[pyfunction]
fn discretise(times: Vec<f64>, values: Vec<Vec<f64>>, n: u32) -> PyResult<Discretised> {
    let path = GridPath::new(times, values).map_err(py_err)?;
    let st = stages(&path, n).map_err(py_err)?;
    let errors = st.errors();
    let strings = |v: &[_]| v.iter().map(format_q).collect::<Vec<_>>();
    Ok(Discretised {
        jump_times: strings(&st.hat.jump_times),
        values: st.hat.values.iter().map(|v| strings(v)).collect(),
        terminal: strings(&st.hat.terminal),
        naive_error: q_to_f64(&errors.naive_vs_path),
        hat_error: q_to_f64(&errors.hat_vs_path),
        lift_error: q_to_f64(&lift_error(&st.hat)),
    })
}

/// Atoms `(support, probs)` implied by put prices.
#[pyfunction]
fn marginal_from_puts(strikes: Vec<f64>, prices: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let curve = PutPriceCurve::new(strikes, prices).map_err(py_err)?;
    let mu = marginals::marginal_from_puts(&curve).map_err(py_err)?;
    Ok((mu.support().to_vec(), mu.probs().to_vec()))
}

fn marginal(support: Vec<f64>, probs: Vec<f64>) -> PyResult<DiscreteMarginal> {
    DiscreteMarginal::new(support, probs).map_err(py_err)
}

#[pyfunction]
fn bl_distance(support_a: Vec<f64>, probs_a: Vec<f64>, support_b: Vec<f64>, probs_b: Vec<f64>) -> PyResult<f64> {
    marginals::bl_distance(&marginal(support_a, probs_a)?, &marginal(support_b, probs_b)?).map_err(py_err)
}

#[pyfunction]
fn convex_order_leq(support_a: Vec<f64>, probs_a: Vec<f64>, support_b: Vec<f64>, probs_b: Vec<f64>) -> PyResult<bool> {
    Ok(marginals::convex_order_leq(&marginal(support_a, probs_a)?, &marginal(support_b, probs_b)?))
}

#[pymodule]
fn robust_bounds(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Discretised>()?;
    m.add_function(wrap_pyfunction!(bounds, m)?)?;
    m.add_function(wrap_pyfunction!(discretise, m)?)?;
    m.add_function(wrap_pyfunction!(marginal_from_puts, m)?)?;
    m.add_function(wrap_pyfunction!(bl_distance, m)?)?;
    m.add_function(wrap_pyfunction!(convex_order_leq, m)?)?;
    Ok(())
}
