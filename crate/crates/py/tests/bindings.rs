use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<F: FnOnce(&Bound<'_, PyDict>)>(f: F) {
    use deepgraph_py::deepgraph_py;
    pyo3::append_to_inittab!(deepgraph_py);
    Python::initialize();
    Python::attach(|py| {
        let globals = PyDict::new(py);
        globals
            .set_item("dg", py.import("deepgraph_py").unwrap())
            .unwrap();
        f(&globals);
    });
}

fn run(globals: &Bound<'_, PyDict>, code: &str) {
    let code = std::ffi::CString::new(code).unwrap();
    if let Err(e) = globals.py().run(&code, Some(globals), None) {
        e.print(globals.py());
        panic!("python snippet failed");
    }
}

#[test]
fn module_round_trip() {
    with_module(|g| {
        run(
            g,
            r#"
c6 = dg.Graph(6, [(i, (i + 1) % 6) for i in range(6)])
assert len(dg.extract(c6)) == 19
assert dg.cycles(c6, 3, 6) == [[0, 1, 2, 3, 4, 5]]
try:
    dg.Graph(2, [(0, 2)])
    raise SystemExit("bad edge accepted")
except ValueError:
    pass
m = dg.Model(layers=1, heads=1, d_hidden=8, seed=1)
data = dg.gen_cycles(6, min_nodes=5, max_nodes=7, seed=2)
assert isinstance(m.predict(data[0]), float)
assert abs(dg.spectral_norm([[0.0, 2.0], [0.0, 0.0]]) - 2.0) < 1e-9
"#,
        );
    });
}
