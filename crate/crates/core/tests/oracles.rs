use biewos_core::geometry::{four_plates, DirichletData, DomainSide, Scene, Shape};
use biewos_core::point_solver::{solve_point, PointParams};
use biewos_core::reference_bem::solve_charge_density;
use biewos_core::vec3::Vec3;
use biewos_core::wos::{estimate_u, WosConfig};

const A: Vec3 = Vec3 { x: -0.2273, y: 0.2273, z: 0.0 };

fn plates() -> Scene {
    Scene::exterior(Shape::PlateSet { plates: four_plates() }, DirichletData::PerFeature(vec![0.0, 1.0, 0.0, 0.0])).unwrap()
}

#[test]
fn four_plate_reference_is_mesh_stable() {
    let s = plates();
    let coarse = solve_charge_density(&s, 17).unwrap().density_at(A).unwrap();
    let fine = solve_charge_density(&s, 33).unwrap().density_at(A).unwrap();
    assert!((coarse / fine - 1.0).abs() < 0.01, "{coarse} {fine}");
    assert!((fine / 2.607 - 1.0).abs() < 0.03, "{fine}");
}

#[test]
fn mean_value_property_on_harmonic_polynomials() {
    for data in [
        DirichletData::Saddle { scale: 1.0 },
        DirichletData::Affine { offset: 0.5, gradient: Vec3::new(1.0, -2.0, 0.5) },
    ] {
        let s = Scene::new(Shape::Sphere { center: Vec3::ZERO, radius: 1.0 }, data, DomainSide::Interior).unwrap();
        for (k, p) in [Vec3::new(0.3, 0.1, -0.2), Vec3::new(-0.5, 0.4, 0.1), Vec3::ZERO].into_iter().enumerate() {
            let cfg = WosConfig { n_paths: 20_000, seed: k as u64, ..Default::default() };
            let e = estimate_u(&s, p, &cfg).unwrap();
            let exact = s.dirichlet_on(p, 0);
            assert!((e.mean - exact).abs() <= 4.0 * e.std_error() + 1e-4, "{} vs {exact} (se {})", e.mean, e.std_error());
        }
    }
}

#[test]
fn disk_density_agrees_with_reference() {
    let s = Scene::exterior(Shape::ThinDisk { radius: 1.0 }, DirichletData::Constant(1.0)).unwrap();
    let x = Vec3::new(-0.5, 0.0, 0.0);
    let reference = solve_charge_density(&s, 200).unwrap().density_at(x).unwrap();
    assert!((reference / 0.735105 - 1.0).abs() < 1e-3);
    let params = PointParams { a: 0.4, n_g1: 10, ..Default::default() };
    let cfg = WosConfig { n_paths: 500, seed: 2, ..Default::default() };
    let r = solve_point(&s, x, &params, &cfg).unwrap();
    assert!((r.total - reference).abs() < 4.0 * r.std_error + 0.01 * reference, "{} ± {} vs {reference}", r.total, r.std_error);
}
