//! Reconstruction simulator on small constructed scenes.

use aerosynth::class::SemanticClass;
use aerosynth::cloud::LabeledPointCloud;
use aerosynth::flight::{plan_crosshatch, CameraIntrinsics, FlightPlan};
use aerosynth::geom::{Rect, Vec3};
use aerosynth::mesh::LabeledMesh;
use aerosynth::pcproc::{volume_density_histogram, DensityRegion};
use aerosynth::recon::{simulate_reconstruction, NoiseParams, Reconstruction};
use aerosynth::render::build_bvh;
use aerosynth::scene::catalog::{sphere_crown, TemplateMesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn add_template(mesh: &mut LabeledMesh, t: &TemplateMesh, offset: Vec3, class: SemanticClass, instance: u32) {
    let base = mesh.vertices.len() as u32;
    mesh.vertices.extend(t.vertices.iter().map(|v| v + offset));
    for tri in &t.triangles {
        mesh.add_triangle([tri[0] + base, tri[1] + base, tri[2] + base], class, instance);
    }
}

fn add_ground(mesh: &mut LabeledMesh, half: f64) {
    let g = |x: f64, y: f64| Vec3::new(x, y, 0.0);
    mesh.push_quad(g(-half, -half), g(half, -half), g(half, half), g(-half, half), SemanticClass::Grass, 0);
}

fn survey(half: f64, altitude: f64) -> FlightPlan {
    plan_crosshatch(Rect::new([-half, -half], [half, half]), altitude, 0.8, 0.8, CameraIntrinsics::from_hfov(256, 192, 60.0)).unwrap()
}

fn run(mesh: &LabeledMesh, plan: &FlightPlan, params: &NoiseParams) -> Reconstruction {
    mesh.validate().unwrap();
    simulate_reconstruction(mesh, &build_bvh(mesh).unwrap(), plan, params).unwrap()
}

#[test]
fn crown_points_form_a_shell() {
    let r = 5.0;
    let crown = sphere_crown(r);
    let mut mesh = LabeledMesh::new();
    add_template(&mut mesh, &crown, Vec3::zeros(), SemanticClass::HighVegetation, 1);
    let crown_tris = mesh.triangle_count() as u32;
    add_ground(&mut mesh, 30.0);
    let params = NoiseParams { seed: 3, ..NoiseParams::default() };
    let rec = run(&mesh, &survey(30.0, 60.0), &params);

    let mut crown_only = LabeledMesh::new();
    add_template(&mut crown_only, &crown, Vec3::zeros(), SemanticClass::HighVegetation, 1);
    let crown_bvh = build_bvh(&crown_only).unwrap();
    let band = 3.0 * params.surface_sigma + 0.05 * r;

    let shell: Vec<Vec3> = (0..rec.cloud.len())
        .filter(|&i| rec.trace.source_triangle[i] < crown_tris && !rec.trace.outlier[i])
        .map(|i| rec.cloud.positions[i])
        .collect();
    assert!(shell.len() > 1000, "{} crown points", shell.len());
    let inside_band = |pts: &[Vec3]| pts.iter().filter(|p| crown_bvh.nearest(p).distance <= band).count() as f64 / pts.len() as f64;
    let simulated = inside_band(&shell);

    // Same number of points filling the crown volume.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let center = Vec3::new(0.0, 0.0, r);
    let mut volume = Vec::new();
    while volume.len() < shell.len() {
        let v = Vec3::new(rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r));
        if v.norm() <= r {
            volume.push(center + v);
        }
    }
    let baseline = inside_band(&volume);
    assert!(simulated >= 0.9, "simulated {simulated}");
    assert!(baseline < 0.3, "baseline {baseline}");

    // Equal-volume shells out to the noise band around the crown surface.
    let cloud = LabeledPointCloud::unlabeled(shell, None);
    let outer_radius = r + 3.0 * params.surface_sigma;
    let h = volume_density_histogram(&cloud, &DensityRegion::Sphere { center: [0.0, 0.0, r], radius: outer_radius }, 10).unwrap();
    let (inner, outer) = (h.densities[0], h.densities[9]);
    assert!(outer > 5.0 * inner, "outer {outer} inner {inner}");
}

#[test]
fn outlier_count_follows_the_rate() {
    let mut mesh = LabeledMesh::new();
    add_ground(&mut mesh, 50.0);
    let params = NoiseParams { outlier_rate: 0.01, density_per_view: 5.0, seed: 17, ..NoiseParams::default() };
    let rec = run(&mesh, &survey(60.0, 60.0), &params);
    let n = rec.cloud.len();
    assert!((90_000..=110_000).contains(&n), "{n} points");
    let outliers = rec.trace.outlier.iter().filter(|&&o| o).count();
    assert_eq!(outliers, rec.stats.outliers);
    assert!((800..=1200).contains(&outliers), "{outliers} outliers");
}

#[test]
fn occluded_surfaces_produce_no_points() {
    let mut mesh = LabeledMesh::new();
    add_ground(&mut mesh, 50.0);
    let slab = TemplateMesh::cuboid(Vec3::new(-20.0, -20.0, 10.0), Vec3::new(20.0, 20.0, 11.0));
    add_template(&mut mesh, &slab, Vec3::zeros(), SemanticClass::Building, 1);
    let params = NoiseParams { seed: 5, ..NoiseParams::default() };
    let rec = run(&mesh, &survey(50.0, 60.0), &params);
    let underside: Vec<usize> = (0..mesh.triangle_count())
        .filter(|&t| mesh.tri_semantic[t] == SemanticClass::Building && mesh.triangle_normal(t).z < -0.5)
        .collect();
    assert_eq!(underside.len(), 2);
    let mut roof = 0;
    for i in 0..rec.cloud.len() {
        let t = rec.trace.source_triangle[i] as usize;
        assert!(!underside.contains(&t), "point {i} on the slab underside");
        if rec.trace.outlier[i] {
            continue;
        }
        let p = rec.cloud.positions[i];
        if mesh.tri_semantic[t] == SemanticClass::Grass {
            // No camera ray reaches ground this far under the slab.
            assert!(p.x.abs() > 12.0 || p.y.abs() > 12.0, "ground point under slab at {p:?}");
        } else if mesh.triangle_normal(t).z > 0.5 {
            roof += 1;
        }
    }
    assert!(roof > 10_000, "{roof} roof points");
}

#[test]
fn zero_noise_points_lie_on_their_source_triangle() {
    let mut mesh = LabeledMesh::new();
    add_ground(&mut mesh, 30.0);
    add_template(&mut mesh, &sphere_crown(3.0), Vec3::new(5.0, -4.0, 0.0), SemanticClass::HighVegetation, 1);
    add_template(&mut mesh, &TemplateMesh::cuboid(Vec3::new(-15.0, -15.0, 0.0), Vec3::new(-5.0, -8.0, 6.0)), Vec3::zeros(), SemanticClass::Building, 2);
    let params = NoiseParams { surface_sigma: 0.0, outlier_rate: 0.0, seed: 8, ..NoiseParams::default() };
    let rec = run(&mesh, &survey(30.0, 50.0), &params);
    assert!(rec.cloud.len() > 10_000);
    assert!(rec.trace.outlier.iter().all(|&o| !o));
    let bvh = build_bvh(&mesh).unwrap();
    for (i, p) in rec.cloud.positions.iter().enumerate() {
        let t = rec.trace.source_triangle[i] as usize;
        let [a, b, c] = mesh.triangle_vertices(t);
        let q = aerosynth::geom::closest_point_on_triangle(p, &a, &b, &c);
        assert!((q - p).norm() < 1e-9, "point {i} is {} off its triangle", (q - p).norm());
        assert!(bvh.nearest(p).distance < 1e-9);
    }
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let mut mesh = LabeledMesh::new();
    add_ground(&mut mesh, 30.0);
    // Enough triangles for several parallel chunks.
    for k in 0..12 {
        let x = -25.0 + 4.5 * k as f64;
        add_template(&mut mesh, &sphere_crown(1.5), Vec3::new(x, 0.0, 0.0), SemanticClass::MediumVegetation, k + 1);
    }
    let plan = survey(30.0, 50.0);
    let params = NoiseParams { seed: 99, ..NoiseParams::default() };
    let in_pool = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| run(&mesh, &plan, &params))
    };
    let one = in_pool(1);
    let four = in_pool(4);
    assert_eq!(one.cloud, four.cloud);
    assert_eq!(one.trace, four.trace);
    let other_seed = run(&mesh, &plan, &NoiseParams { seed: 100, ..params.clone() });
    assert_ne!(one.cloud.positions, other_seed.cloud.positions);
}
