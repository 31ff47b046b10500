//! Adaptive refinement on the singular benchmark.

use kirchhoff::adaptivity::{adaptive_loop, AdaptiveConfig, Discretization, Method};
use kirchhoff::benchmarks::lshape_singular_case;

#[test]
fn refinement_concentrates_at_the_reentrant_corner() {
    let case = lshape_singular_case();
    let disc = Discretization {
        method: Method::Ipdg,
        k: 2,
        alpha: case.alpha(2),
    };
    let cfg = AdaptiveConfig {
        max_levels: 10,
        ..Default::default()
    };
    let levels = adaptive_loop(case.mesh(2).unwrap(), &disc, &case.load, case.exact(), &cfg).unwrap();
    assert_eq!(levels.len(), 10);
    let mesh = &levels.last().unwrap().mesh;
    let mean_diameter = |pred: &dyn Fn(f64) -> bool| {
        let d: Vec<f64> = (0..mesh.num_triangles())
            .filter(|&t| {
                let c = mesh.centroid(t);
                pred(c[0].hypot(c[1]))
            })
            .map(|t| mesh.diameter(t))
            .collect();
        d.iter().sum::<f64>() / d.len() as f64
    };
    let near = mean_diameter(&|r| r < 0.2);
    let far = mean_diameter(&|r| r > 0.7);
    assert!(near < 0.5 * far, "near {near}, far {far}");
    let hmin = (0..mesh.num_triangles()).map(|t| mesh.diameter(t)).fold(f64::INFINITY, f64::min);
    let corner_h = (0..mesh.num_triangles())
        .filter(|&t| mesh.triangle(t).iter().any(|&v| mesh.vertex(v) == [0.0, 0.0]))
        .map(|t| mesh.diameter(t))
        .fold(f64::INFINITY, f64::min);
    assert!(corner_h <= hmin * (1.0 + 1e-12), "corner elements {corner_h}, smallest {hmin}");
    for l in &levels {
        let r = &l.report;
        assert!(r.eff().unwrap() >= 1.0);
        assert!(r.eta_mean <= r.eta_nonconf + 0.5 * r.eta_eq + 1e-12);
        assert!(r.improved_bound() <= r.basic_bound());
    }
    // Errors decrease from level to level.
    let errs: Vec<f64> = levels.iter().map(|l| l.report.exact_error.unwrap()).collect();
    assert!(errs.last().unwrap() < &errs[0]);
}
