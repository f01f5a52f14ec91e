use pyo3::prelude::*;
use pyo3::types::PyDict;

#[test]
fn module_functions_from_python() {
    Python::attach(|py| {
        let m = pyo3::wrap_pymodule!(tacfoot::tacfoot)(py);
        let m = m.bind(py);
        let phi: f64 = m
            .getattr("control_angle")
            .unwrap()
            .call1((0.0, 0.0))
            .unwrap()
            .extract()
            .unwrap();
        assert!((phi - 172.16).abs() < 0.005);
        let d: f64 = m
            .getattr("duty_cycle")
            .unwrap()
            .call1((0.0,))
            .unwrap()
            .extract()
            .unwrap();
        assert!((d - 0.025).abs() < 1e-12);

        let kwargs = PyDict::new(py);
        kwargs.set_item("shaft_offset", 0.3).unwrap();
        let err = m
            .getattr("control_angle")
            .unwrap()
            .call((1.0, 1.0), Some(&kwargs))
            .unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));

        let (w, h, rgb): (usize, usize, Vec<u8>) = m
            .getattr("generate_pattern")
            .unwrap()
            .call1((4, 3))
            .unwrap()
            .extract()
            .unwrap();
        assert_eq!((w, h, rgb.len()), (16, 12, 16 * 12 * 3));

        let g = m.getattr("simulate_grasp").unwrap().call1(("heavy", false)).unwrap();
        let intact: bool = g.get_item("intact").unwrap().extract().unwrap();
        assert!(!intact);
        let err = m.getattr("run_balance").unwrap().call1(("flat", "sonar")).unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
    });
}
