//! Acceptance checks: one PASS/FAIL line per criterion, each with its
//! runtime budget. Exits non-zero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use aerosynth::annotate::{enforce_ground_connectivity, TransferParams};
use aerosynth::class::{SemanticClass, FINE_CLASS_COUNT};
use aerosynth::cloud::LabeledPointCloud;
use aerosynth::eval::{confusion, instance_ap, semantic_scores, ConfusionMatrix, GtInstance, InstancePrediction, ScanNetThresholds};
use aerosynth::flight::{plan_crosshatch, Camera, CameraIntrinsics, CameraPose, FlightPlan};
use aerosynth::geom::{ray_triangle, Ray, Rect, Vec3};
use aerosynth::io::{read_cloud_ply, read_mesh_ply};
use aerosynth::mesh::LabeledMesh;
use aerosynth::pcproc::downsample::voxel_key;
use aerosynth::pcproc::mapping::{REAL6_NAMES, REDUCED9_NAMES};
use aerosynth::pcproc::{grid_downsample, map_classes, sample_fixed_count, sample_sphere, tile_blocks, volume_density_histogram, ClassMapping, DensityRegion};
use aerosynth::recon::{simulate_reconstruction, NoiseParams};
use aerosynth::render::{build_bvh, render, Hit};
use aerosynth::scene::catalog::{sphere_crown, TemplateMesh};
use aerosynth_cli::config::RunConfig;
use aerosynth_cli::manifest::RunManifest;
use aerosynth_cli::pipeline::{paths, run_stages, Stage};
use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Q = Ratio<u64>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// Flight geometry.

fn footprint(cam: &Camera, base: f64) -> [Vec3; 4] {
    let f = cam.frame();
    let k = cam.intrinsics;
    let corner = |u: f64, v: f64| {
        let d = f.forward + f.right * ((u - k.cx) / k.focal) + f.down * ((v - k.cy) / k.focal);
        f.origin + d * ((base - f.origin.z) / d.z)
    };
    let (w, h) = (k.width as f64, k.height as f64);
    [corner(0.0, 0.0), corner(w, 0.0), corner(w, h), corner(0.0, h)]
}

fn overlap(a: &[Vec3; 4], b: &[Vec3; 4], axis: Vec3) -> f64 {
    let span = |p: &[Vec3; 4]| {
        let d: Vec<f64> = p.iter().map(|v| v.dot(&axis)).collect();
        (d.iter().copied().fold(f64::INFINITY, f64::min), d.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    };
    let ((a0, a1), (b0, b1)) = (span(a), span(b));
    (a1.min(b1) - a0.max(b0)).max(0.0) / (a1 - a0)
}

fn worst_overlap_errors(plan: &FlightPlan) -> (f64, f64) {
    let cams: Vec<Camera> = plan.cameras().collect();
    let heading = |pass: u8| {
        let a = plan.passes[pass as usize];
        Vec3::new(a.cos(), a.sin(), 0.0)
    };
    let (mut fwd, mut side) = (0.0f64, 0.0f64);
    for line in &plan.lines {
        for i in line.start..line.start + line.len - 1 {
            let o = overlap(&footprint(&cams[i], plan.base_elevation), &footprint(&cams[i + 1], plan.base_elevation), heading(line.pass));
            fwd = fwd.max((o - plan.forward_overlap).abs());
        }
    }
    for pair in plan.lines.windows(2).filter(|p| p[0].pass == p[1].pass) {
        let h = heading(pair[0].pass);
        let across = Vec3::new(-h.y, h.x, 0.0);
        let o = overlap(&footprint(&cams[pair[0].start], plan.base_elevation), &footprint(&cams[pair[1].start], plan.base_elevation), across);
        side = side.max((o - plan.side_overlap).abs());
    }
    (fwd, side)
}

fn criterion_1() -> Outcome {
    let k = CameraIntrinsics::from_hfov(256, 192, 60.0);
    let mut worst = 0.0f64;
    let mut worst_angle = 0.0f64;
    for altitude in [60.0, 90.0, 120.0] {
        for ov in [0.75, 0.85] {
            let plan = plan_crosshatch(Rect::new([0.0, 0.0], [200.0, 200.0]), altitude, ov, ov, k).map_err(|e| e.to_string())?;
            let (f, s) = worst_overlap_errors(&plan);
            worst = worst.max(f).max(s);
            worst_angle = worst_angle.max((plan.passes[1] - plan.passes[0] - std::f64::consts::FRAC_PI_2).abs());
            check(f <= 0.01 && s <= 0.01, || format!("altitude {altitude} overlap {ov}: errors {f:.4} / {s:.4}"))?;
        }
    }
    check(worst_angle <= 1e-9, || format!("pass angle off by {worst_angle:e} rad"))?;
    Ok(format!("worst overlap error {worst:.2e}, pass angle error {worst_angle:.1e} rad"))
}

// Ray casting.

fn brute_hit(mesh: &LabeledMesh, ray: &Ray) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for t in 0..mesh.triangle_count() {
        let [a, b, c] = mesh.triangle_vertices(t);
        if let Some(d) = ray_triangle(ray, &a, &b, &c, 0.0, f64::INFINITY) {
            if best.is_none_or(|h| d < h.t) {
                best = Some(Hit { t: d, triangle: t });
            }
        }
    }
    best
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mesh = LabeledMesh::new();
    while mesh.triangle_count() < 1000 {
        let c = Vec3::new(rng.random_range(0.0..50.0), rng.random_range(0.0..50.0), rng.random_range(0.0..50.0));
        let mut v = || c + Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let (a, b, d) = (v(), v(), v());
        mesh.push_triangle(a, b, d, SemanticClass::Road, 0);
    }
    let bvh = build_bvh(&mesh).map_err(|e| e.to_string())?;
    let mut hits = 0;
    for k in 0..1000 {
        let origin = Vec3::new(rng.random_range(-10.0..60.0), rng.random_range(-10.0..60.0), rng.random_range(-10.0..60.0));
        let dir = if k % 2 == 0 {
            let [a, b, c] = mesh.triangle_vertices(rng.random_range(0..mesh.triangle_count()));
            (a + b + c) / 3.0 - origin
        } else {
            Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        };
        let ray = Ray::new(origin, dir.normalize());
        let want = brute_hit(&mesh, &ray);
        let got = bvh.closest_hit(&ray, 0.0, f64::INFINITY);
        check(got == want, || format!("ray {k}: bvh {got:?} brute {want:?}"))?;
        hits += want.is_some() as usize;
    }

    let mut worst = 0.0f64;
    for (a, b, c, alt) in [(0.0, 0.0, 0.0, 60.0), (0.1, -0.05, 3.0, 80.0), (-0.2, 0.15, -4.0, 45.0)] {
        let z = |x: f64, y: f64| Vec3::new(x, y, a * x + b * y + c);
        let mut plane = LabeledMesh::new();
        plane.push_quad(z(-500.0, -500.0), z(500.0, -500.0), z(500.0, 500.0), z(-500.0, 500.0), SemanticClass::Grass, 0);
        let pb = build_bvh(&plane).map_err(|e| e.to_string())?;
        let cam = Camera::new(CameraIntrinsics::from_hfov(65, 49, 60.0), CameraPose::nadir([3.0, -7.0, alt], 0.4));
        let img = render(&cam, &pb, &plane).map_err(|e| e.to_string())?;
        let frame = cam.frame();
        for v in 0..49 {
            for u in 0..65 {
                let r = frame.pixel_ray(u, v);
                let t = (a * r.origin.x + b * r.origin.y + c - r.origin.z) / (r.dir.z - a * r.dir.x - b * r.dir.y);
                worst = worst.max((img.depth[img.index(u, v)] - t).abs());
            }
        }
    }
    check(worst <= 1e-6, || format!("plane depth error {worst:e} m"))?;
    Ok(format!("1000 rays agree ({hits} hits, ties to lowest index), plane depth error {worst:.1e} m"))
}

// Zero-noise round trip on the demo scene.

fn criterion_3() -> Outcome {
    let mut cfg = RunConfig::demo();
    cfg.noise.surface_sigma = 0.0;
    cfg.noise.outlier_rate = 0.0;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path();
    let stages = [Stage::GenScene, Stage::PlanFlight, Stage::Render, Stage::Reconstruct, Stage::Annotate, Stage::Eval];
    run_stages(&cfg, out, &stages).map_err(|f| format!("{}: {:#}", f.stage.name(), f.error))?;
    let read = |rel: &str| read_cloud_ply(File::open(out.join(rel)).map_err(|e| e.to_string())?).map_err(|e| e.to_string());
    let labeled = read(paths::LABELED)?;
    let reference = read(paths::REFERENCE)?;
    let mesh = read_mesh_ply(File::open(out.join(paths::MESH)).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let bvh = build_bvh(&mesh).map_err(|e| e.to_string())?;
    let radius = cfg.transfer.max_nn_distance;

    let (mut interior, mut interior_agree, mut agree) = (0usize, 0usize, 0usize);
    let mut mismatches: BTreeMap<(u8, u8), usize> = BTreeMap::new();
    for i in 0..labeled.len() {
        let same = labeled.semantic[i] == reference.semantic[i];
        agree += same as usize;
        // Interior: every surface within the transfer radius has the source class.
        let class = reference.semantic[i];
        if bvh.triangles_within(&labeled.positions[i], radius).iter().all(|&t| mesh.tri_semantic[t].id() == class) {
            interior += 1;
            interior_agree += same as usize;
            if !same {
                *mismatches.entry((class, labeled.semantic[i])).or_default() += 1;
            }
        }
    }
    let overall = agree as f64 / labeled.len() as f64;
    let summary = format!(
        "{} points, interior agreement {interior_agree}/{interior}, overall agreement {:.4}%",
        labeled.len(),
        100.0 * overall
    );
    let name = |id: u8| SemanticClass::from_id(id).map_or("unlabeled", |c| c.name());
    let mut pairs: Vec<((u8, u8), usize)> = mismatches.into_iter().collect();
    pairs.sort_by(|a, b| b.1.cmp(&a.1));
    let top: Vec<String> = pairs.iter().take(4).map(|&((s, l), n)| format!("{n} {} as {}", name(s), name(l))).collect();
    check(interior > labeled.len() / 2, || format!("{summary}; too few interior points"))?;
    check(top.is_empty(), || format!("{summary}; interior mismatches: {}", top.join(", ")))?;
    Ok(summary)
}

// Shell property.

fn add_template(mesh: &mut LabeledMesh, t: &TemplateMesh, class: SemanticClass, instance: u32) {
    let base = mesh.vertices.len() as u32;
    mesh.vertices.extend(t.vertices.iter().copied());
    for tri in &t.triangles {
        mesh.add_triangle([tri[0] + base, tri[1] + base, tri[2] + base], class, instance);
    }
}

fn criterion_4() -> Outcome {
    let r = 5.0;
    let crown = sphere_crown(r);
    let mut mesh = LabeledMesh::new();
    add_template(&mut mesh, &crown, SemanticClass::HighVegetation, 1);
    let crown_tris = mesh.triangle_count() as u32;
    let g = |x: f64, y: f64| Vec3::new(x, y, 0.0);
    mesh.push_quad(g(-30.0, -30.0), g(30.0, -30.0), g(30.0, 30.0), g(-30.0, 30.0), SemanticClass::Grass, 0);
    let plan = plan_crosshatch(Rect::new([-30.0, -30.0], [30.0, 30.0]), 60.0, 0.8, 0.8, CameraIntrinsics::from_hfov(256, 192, 60.0))
        .map_err(|e| e.to_string())?;
    let params = NoiseParams { seed: 3, ..NoiseParams::default() };
    let rec = simulate_reconstruction(&mesh, &build_bvh(&mesh).map_err(|e| e.to_string())?, &plan, &params).map_err(|e| e.to_string())?;

    let mut crown_only = LabeledMesh::new();
    add_template(&mut crown_only, &crown, SemanticClass::HighVegetation, 1);
    let crown_bvh = build_bvh(&crown_only).map_err(|e| e.to_string())?;
    let band = 3.0 * params.surface_sigma + 0.05 * r;
    let shell: Vec<Vec3> = (0..rec.cloud.len())
        .filter(|&i| rec.trace.source_triangle[i] < crown_tris && !rec.trace.outlier[i])
        .map(|i| rec.cloud.positions[i])
        .collect();
    let in_band = |pts: &[Vec3]| pts.iter().filter(|p| crown_bvh.nearest(p).distance <= band).count() as f64 / pts.len() as f64;
    let simulated = in_band(&shell);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut volume = Vec::new();
    while volume.len() < shell.len() {
        let v = Vec3::new(rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r));
        if v.norm() <= r {
            volume.push(Vec3::new(0.0, 0.0, r) + v);
        }
    }
    let baseline = in_band(&volume);
    let region = DensityRegion::Sphere { center: [0.0, 0.0, r], radius: r + 3.0 * params.surface_sigma };
    let h = volume_density_histogram(&LabeledPointCloud::unlabeled(shell.clone(), None), &region, 10).map_err(|e| e.to_string())?;
    let ratio = h.densities[9] / h.densities[0].max(f64::MIN_POSITIVE);
    let summary = format!("{} crown points, {:.1}% in band vs {:.1}% baseline, outer/inner density {ratio:.1}", shell.len(), 100.0 * simulated, 100.0 * baseline);
    check(simulated >= 0.9 && baseline < 0.3 && h.densities[9] > 5.0 * h.densities[0], || summary.clone())?;
    Ok(summary)
}

// Ground connectivity.

fn rooftop_fixture() -> (LabeledPointCloud, Vec<usize>) {
    let mut c = LabeledPointCloud::new();
    let mut island = Vec::new();
    for i in 0..=40 {
        for j in 0..=40 {
            let (x, y) = (i as f64 * 0.5, j as f64 * 0.5);
            if !((6.0..=14.0).contains(&x) && (6.0..=14.0).contains(&y)) {
                c.push(Vec3::new(x, y, 0.0), None, SemanticClass::Grass.id(), 0);
            } else if (9.5..=10.0).contains(&x) && (9.5..=10.0).contains(&y) {
                island.push(c.len());
                c.push(Vec3::new(x, y, 6.0), None, SemanticClass::Grass.id(), 0);
            } else {
                c.push(Vec3::new(x, y, 6.0), None, SemanticClass::Building.id(), 7);
            }
        }
    }
    (c, island)
}

fn criterion_5() -> Outcome {
    let (cloud, island) = rooftop_fixture();
    let params = TransferParams::default();
    let (out, report) = enforce_ground_connectivity(&cloud, &params).map_err(|e| e.to_string())?;
    let changed: Vec<usize> = (0..cloud.len()).filter(|&i| out.semantic[i] != cloud.semantic[i] || out.instance[i] != cloud.instance[i]).collect();
    check(changed == island, || format!("relabeled {changed:?}, island {island:?}"))?;
    check(island.iter().all(|&i| out.semantic[i] == SemanticClass::Building.id() && out.instance[i] == 7), || "island not merged into the roof".into())?;
    let (again, _) = enforce_ground_connectivity(&out, &params).map_err(|e| e.to_string())?;
    check(again == out, || "not idempotent".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let mut order: Vec<usize> = (0..cloud.len()).collect();
        order.shuffle(&mut rng);
        let (p, _) = enforce_ground_connectivity(&cloud.select(&order), &params).map_err(|e| e.to_string())?;
        check(order.iter().enumerate().all(|(k, &i)| p.semantic[k] == out.semantic[i] && p.instance[k] == out.instance[i]), || "order dependent".into())?;
    }
    Ok(format!("{} of {} points relabeled in {} components, idempotent, order independent", report.relabeled, cloud.len(), report.components))
}

// Downsampling.

fn criterion_6() -> Outcome {
    let pair = |d: f64| {
        let mut c = LabeledPointCloud::new();
        c.push(Vec3::zeros(), None, 0, 0);
        c.push(Vec3::new(d, 0.0, 0.0), None, 0, 0);
        grid_downsample(&c, 0.3).map(|o| o.len()).map_err(|e| e.to_string())
    };
    let (close, far) = (pair(0.1)?, pair(0.5)?);
    check(close == 1 && far == 2, || format!("pair survivors {close} and {far}, expected 1 and 2"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut cloud = LabeledPointCloud::new();
    for _ in 0..50_000 {
        cloud.push(Vec3::new(rng.random_range(0.0..20.0), rng.random_range(0.0..20.0), rng.random_range(0.0..5.0)), None, rng.random_range(0..18), 0);
    }
    let out = grid_downsample(&cloud, 0.3).map_err(|e| e.to_string())?;
    let origin = cloud.bounds().min;
    let keys: BTreeSet<[i64; 3]> = out.positions.iter().map(|p| voxel_key(p, &origin, 0.3)).collect();
    let occupied: BTreeSet<[i64; 3]> = cloud.positions.iter().map(|p| voxel_key(p, &origin, 0.3)).collect();
    check(keys.len() == out.len(), || "two survivors share a voxel".into())?;
    check(keys == occupied, || "an occupied voxel lost its point".into())?;
    Ok(format!("pairs at 0.1/0.5 m keep {close}/{far}; 50000 random points keep {} in distinct voxels", out.len()))
}

// Metric oracles.

fn random_matrix(rng: &mut ChaCha8Rng) -> ConfusionMatrix {
    let k = rng.random_range(1..=9);
    let mut cm = ConfusionMatrix::zeros(k);
    for g in 0..k {
        for p in 0..k {
            if rng.random_bool(0.5) {
                cm.add(g, p, rng.random_range(0..200));
            }
        }
    }
    if cm.total() == 0 {
        cm.add(0, 0, 1);
    }
    cm
}

fn q_to_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

fn exact_iou(a: &[usize], b: &[usize]) -> Q {
    let inter = a.iter().filter(|p| b.contains(p)).count() as u64;
    Q::new(inter, (a.len() + b.len()) as u64 - inter)
}

/// Lexicographically best injective matching of ranked predictions, keyed
/// per rank by (matched, IoU, lower gt index).
fn exhaustive_flags(iou: &[Vec<Q>], thr: Q) -> Vec<bool> {
    type Key = Vec<(bool, Q, i64)>;
    fn go(iou: &[Vec<Q>], thr: Q, p: usize, used: &mut Vec<bool>, cur: &mut Key, best: &mut Option<Key>) {
        if p == iou.len() {
            if best.as_ref().is_none_or(|b| *cur > *b) {
                *best = Some(cur.clone());
            }
            return;
        }
        cur.push((false, Q::from_integer(0), 0));
        go(iou, thr, p + 1, used, cur, best);
        cur.pop();
        for g in 0..used.len() {
            if !used[g] && iou[p][g] >= thr {
                used[g] = true;
                cur.push((true, iou[p][g], -(g as i64)));
                go(iou, thr, p + 1, used, cur, best);
                cur.pop();
                used[g] = false;
            }
        }
    }
    let mut best = None;
    go(iou, thr, 0, &mut vec![false; iou.first().map_or(0, Vec::len)], &mut Vec::new(), &mut best);
    best.map(|k| k.iter().map(|e| e.0).collect()).unwrap_or_default()
}

fn exact_ap(flags: &[bool], gt: usize) -> Q {
    if gt == 0 {
        return Q::from_integer(0);
    }
    let mut tp = 0u64;
    let pr: Vec<(Q, Q)> = flags
        .iter()
        .enumerate()
        .map(|(k, &f)| {
            tp += f as u64;
            (Q::new(tp, k as u64 + 1), Q::new(tp, gt as u64))
        })
        .collect();
    let sum: Q = (0..=100u64).map(|l| pr.iter().filter(|(_, r)| *r >= Q::new(l, 100)).map(|(p, _)| *p).max().unwrap_or(Q::from_integer(0))).sum();
    sum / 101
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for m in 0..50 {
        let cm = random_matrix(&mut rng);
        let s = semantic_scores(&cm).map_err(|e| e.to_string())?;
        let (mut sum, mut n) = (Q::from_integer(0), 0u64);
        for c in 0..cm.classes {
            let tp = cm.get(c, c);
            let union = (0..cm.classes).map(|i| cm.get(i, c) + cm.get(c, i)).sum::<u64>() - tp;
            check(s.iou_terms[c] == (tp, union), || format!("matrix {m} class {c}: terms {:?}", s.iou_terms[c]))?;
            if union > 0 {
                sum += Q::new(tp, union);
                n += 1;
            }
        }
        check((s.miou - q_to_f64(sum / n)).abs() <= 1e-12, || format!("matrix {m}: miou {} vs {}", s.miou, sum / n))?;
    }
    let gt: Vec<u8> = (0..500).map(|_| rng.random_range(0..4)).collect();
    let cm = confusion(&gt, &gt, 4, None).map_err(|e| e.to_string())?;
    check(semantic_scores(&cm).map_err(|e| e.to_string())?.miou == 1.0, || "identity labels not perfect".into())?;

    let all = ScanNetThresholds::all();
    let exact: Vec<Q> = (0..10).map(|k| Q::new(50 + 5 * k, 100)).chain([Q::new(25, 100)]).collect();
    let ascending: Vec<usize> = std::iter::once(10).chain(0..10).collect();
    for trial in 0..1000 {
        let points = rng.random_range(8..30);
        let n_gt = rng.random_range(0..=5);
        let owner: Vec<usize> = (0..points).map(|_| rng.random_range(0..=n_gt)).collect();
        let gts: Vec<GtInstance> = (0..n_gt)
            .map(|g| GtInstance { class: rng.random_range(0..2), points: (0..points).filter(|&p| owner[p] == g).collect() })
            .filter(|g| !g.points.is_empty())
            .collect();
        let preds: Vec<InstancePrediction> = (0..rng.random_range(0..=5))
            .map(|_| {
                let mut pts: Vec<usize> = if gts.is_empty() || rng.random_bool(0.2) {
                    (0..points).filter(|_| rng.random_bool(0.3)).collect()
                } else {
                    let g = &gts[rng.random_range(0..gts.len())];
                    let mut v: Vec<usize> = g.points.iter().copied().filter(|_| rng.random_bool(0.8)).collect();
                    v.extend((0..points).filter(|_| rng.random_bool(0.1)));
                    v
                };
                pts.sort_unstable();
                pts.dedup();
                if pts.is_empty() {
                    pts.push(0);
                }
                InstancePrediction { class: rng.random_range(0..2), points: pts, confidence: rng.random_range(1..=4) as f64 / 4.0 }
            })
            .collect();
        let table = instance_ap(&gts, &preds, points, &all).map_err(|e| e.to_string())?;
        for row in &table.classes {
            let g: Vec<&GtInstance> = gts.iter().filter(|x| x.class == row.class).collect();
            let mut ranked: Vec<usize> = (0..preds.len()).filter(|&i| preds[i].class == row.class).collect();
            ranked.sort_by(|&a, &b| preds[b].confidence.total_cmp(&preds[a].confidence).then(a.cmp(&b)));
            let iou: Vec<Vec<Q>> = ranked.iter().map(|&i| g.iter().map(|x| exact_iou(&preds[i].points, &x.points)).collect()).collect();
            for (k, &thr) in exact.iter().enumerate() {
                let want = q_to_f64(exact_ap(&exhaustive_flags(&iou, thr), g.len()));
                check((row.ap[k] - want).abs() <= 1e-12, || format!("trial {trial} class {} threshold {}: {} vs {want}", row.class, all[k], row.ap[k]))?;
            }
            check(ascending.windows(2).all(|w| row.ap[w[1]] <= row.ap[w[0]] + 1e-12), || format!("trial {trial}: AP rises with threshold {:?}", row.ap))?;
        }
    }
    Ok("50 rational confusion matrices, 1000 exhaustive instance trials, AP monotone on all".into())
}

// Class mappings.

fn criterion_8() -> Outcome {
    use SemanticClass::*;
    let six = ClassMapping::synthetic_to_real6();
    let groups: [(&str, &[SemanticClass]); 6] = [
        ("Ground", &[Road, Dirt, Grass, Ground]),
        ("Tree", &[LowVegetation, MediumVegetation, HighVegetation]),
        ("Car", &[Vehicle, Truck, MilitaryVehicle]),
        ("Light pole", &[LightPole, StreetSign]),
        ("Fence", &[Fence]),
        ("Building", &[Building, Window, Aircraft, Bike, Motorcycle, Clutter]),
    ];
    for (name, classes) in groups {
        for c in classes {
            let got = six.get(c.id()).map(|t| REAL6_NAMES[t as usize]);
            check(got == Some(name), || format!("{} maps to {got:?}, expected {name}", c.name()))?;
        }
    }
    check(SemanticClass::ALL.iter().all(|c| six.get(c.id()).is_some()), || "18 to 6 mapping is not total".into())?;
    let nine = ClassMapping::instance14_to_9();
    let groups9: [(&str, &[SemanticClass]); 9] = [
        ("Building", &[Building]),
        ("Vegetation", &[LowVegetation, MediumVegetation, HighVegetation]),
        ("Vehicle", &[Vehicle]),
        ("Large vehicle", &[Truck, MilitaryVehicle]),
        ("Aircraft", &[Aircraft]),
        ("Bike", &[Bike, Motorcycle]),
        ("Poles&Signs", &[LightPole, StreetSign]),
        ("Clutter", &[Clutter]),
        ("Fence", &[Fence]),
    ];
    for (name, classes) in groups9 {
        for c in classes {
            let got = nine.get(c.id()).map(|t| REDUCED9_NAMES[t as usize]);
            check(got == Some(name), || format!("{} maps to {got:?}, expected {name}", c.name()))?;
        }
    }
    check(SemanticClass::INSTANCE_CAPABLE.iter().all(|c| nine.get(c.id()).is_some()), || "14 to 9 mapping is not total".into())?;

    let mut cloud = LabeledPointCloud::new();
    for (k, c) in SemanticClass::ALL.iter().enumerate() {
        for j in 0..=k {
            cloud.push(Vec3::new(k as f64, j as f64, 0.0), None, c.id(), 1);
        }
    }
    let mapped = map_classes(&cloud, &six).map_err(|e| e.to_string())?;
    check(mapped.len() == cloud.len() && mapped.positions == cloud.positions, || "18 to 6 changed the points".into())?;
    let inst: Vec<usize> = (0..cloud.len()).filter(|&i| SemanticClass::from_id(cloud.semantic[i]).is_some_and(|c| c.is_instance_capable())).collect();
    let sub = cloud.select(&inst);
    let mapped9 = map_classes(&sub, &nine).map_err(|e| e.to_string())?;
    check(mapped9.len() == sub.len(), || "14 to 9 changed the point count".into())?;
    Ok(format!("18 to 6 and 14 to 9 exact, {} and {} points preserved", mapped.len(), mapped9.len()))
}

// End-to-end demo.

fn run_demo(out: &Path) -> Result<RunManifest, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_aerosynth"))
        .args(["all", "--out"])
        .arg(out)
        .env("RUST_LOG", "warn")
        .status()
        .map_err(|e| e.to_string())?;
    check(status.success(), || format!("`aerosynth all` exited with {status}"))?;
    let text = std::fs::read_to_string(out.join(paths::MANIFEST)).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let a = run_demo(&dir.path().join("a"))?;
    let first = start.elapsed();
    let b = run_demo(&dir.path().join("b"))?;
    let (ha, hb) = (a.output_hashes(), b.output_hashes());
    check(!ha.is_empty() && ha == hb, || "reruns differ".into())?;
    let audit = a.audit.ok_or("no audit in the manifest")?;
    let strategies: BTreeSet<String> = a.config.scene.placement.iter().map(|r| format!("{:?}", r.strategy)).collect();
    let summary = format!(
        "{} points, {}/{FINE_CLASS_COUNT} fine classes, {:.3}% unlabeled, {} placement strategies, {} identical outputs, first run {:.0} s",
        audit.points,
        audit.fine_classes_present,
        100.0 * audit.unlabeled_fraction,
        strategies.len(),
        ha.len(),
        first.as_secs_f64()
    );
    check(audit.fine_classes_present >= 12 && audit.unlabeled_fraction <= 0.02 && strategies.len() == 5, || summary.clone())?;
    check(first < Duration::from_secs(600), || summary.clone())?;
    Ok(summary)
}

// Tilers.

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut cloud = LabeledPointCloud::new();
    for _ in 0..100_000 {
        cloud.push(Vec3::new(rng.random_range(0.0..200.0), rng.random_range(0.0..150.0), rng.random_range(0.0..30.0)), None, 0, 0);
    }
    let tiles = tile_blocks(&cloud, 50.0).map_err(|e| e.to_string())?;
    let mut seen = vec![0u8; cloud.len()];
    for t in &tiles {
        for &i in &t.indices {
            seen[i] += 1;
        }
    }
    check(seen.iter().all(|&s| s == 1), || "blocks are not a partition".into())?;
    check(tiles.iter().map(|t| t.points.len()).sum::<usize>() == cloud.len(), || "block sizes do not sum".into())?;

    let center = Vec3::new(90.0, 70.0, 15.0);
    let mut order: Vec<(f64, usize)> = cloud.positions.iter().enumerate().map(|(i, p)| ((p - center).norm_squared(), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut sphere = sample_sphere(&cloud, center, 18.0).map_err(|e| e.to_string())?.indices;
    sphere.sort_unstable();
    let mut want: Vec<usize> = order.iter().take_while(|e| e.0 <= 18.0 * 18.0).map(|e| e.1).collect();
    want.sort_unstable();
    check(sphere == want, || format!("sphere has {} points, oracle {}", sphere.len(), want.len()))?;
    let fixed = sample_fixed_count(&cloud, center, 40_960).map_err(|e| e.to_string())?;
    let want_fixed: Vec<usize> = order.iter().take(40_960).map(|e| e.1).collect();
    check(fixed.indices == want_fixed, || "fixed-count sample differs from the oracle".into())?;
    Ok(format!("{} blocks partition 100000 points, sphere {} points, 40960 nearest match", tiles.len(), sphere.len()))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, u64, fn() -> Outcome); 10] = [
        (1, "flight geometry", 1, criterion_1),
        (2, "ray casting", 10, criterion_2),
        (3, "zero-noise round trip", 120, criterion_3),
        (4, "shell property", 30, criterion_4),
        (5, "ground connectivity", 1, criterion_5),
        (6, "downsampling", 1, criterion_6),
        (7, "metric oracles", 60, criterion_7),
        (8, "class mappings", 1, criterion_8),
        (9, "end-to-end demo", 600, criterion_9),
        (10, "tilers", 10, criterion_10),
    ];
    let only: BTreeMap<u32, ()> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).map(|n| (n, ())).collect();
    let mut failed = 0;
    for (n, name, budget, f) in criteria {
        if !only.is_empty() && !only.contains_key(&n) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        let result = match result {
            Ok(_) if secs > budget as f64 => Err(format!("took {secs:.1} s, budget {budget} s")),
            r => r,
        };
        match result {
            Ok(detail) => println!("criterion {n} ({name}): PASS in {secs:.2} s: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL in {secs:.2} s: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
