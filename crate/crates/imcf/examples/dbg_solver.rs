use imcf::geometry::make_preset;
use imcf::regsolver::*;
use std::collections::BTreeMap;

fn main() {
    let metric = make_preset("euclidean", &BTreeMap::from([("s_max".to_string(), 1e4)])).unwrap();
    for l3 in [10.5, 11.0, 11.5] {
        let schedule = [(1e-1, 5.0, 1024), (1e-2, 8.0, 2048), (1e-3, l3, 4096)];
        match convergence_study(&metric, 1.0, &schedule) {
            Ok(report) => {
                let st = &report.stages;
                println!("L3={}: pass={} errs=[{:.3e},{:.3e},{:.3e}] resid3={:.2e} iters3={}",
                    l3, report.pass, st[0].err_vs_flow, st[1].err_vs_flow, st[2].err_vs_flow,
                    st[2].residual_norm, st[2].newton_iterations);
            }
            Err(e) => println!("L3={}: ERROR {}", l3, e),
        }
    }
    // level extraction at L=10
    let problem = RegularizedProblem::new(&metric, 1.0, 10.0, 1e-3, 4096).unwrap();
    let result = solve_newton(&problem, None).unwrap();
    let s = level_set_extract(&result, 2.0*2f64.ln()).unwrap();
    println!("L=10 n=4096: level 2ln2 -> s err {:.2e}, resid {:.2e}, conv {}", (s-2.0).abs(), result.residual_norm, result.converged);
}
