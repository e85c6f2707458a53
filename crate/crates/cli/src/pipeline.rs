//! The stages. Each one reads the artifacts of earlier stages from the
//! output directory and writes its own there, so any stage can be re-run
//! alone. Stage `s` draws randomness only from `derive_seed(root, s)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use aerosynth::annotate::{boundary_fraction, build_point_index, enforce_ground_connectivity, transfer_counted};
use aerosynth::class::{SemanticClass, CLASS_COUNT, FINE_CLASS_COUNT, UNLABELED};
use aerosynth::eval::{
    confusion, instance_ap, instance_report_csv, instances_from_labels, semantic_report_csv, semantic_scores, InstancePrediction,
    ScanNetThresholds, SegmentationReport,
};
use aerosynth::flight::{apply_wind_jitter, plan_crosshatch, CameraIntrinsics, FlightPlan};
use aerosynth::io::{read_cloud_ply, read_mesh_ply, write_cloud_ply, write_mesh_ply};
use aerosynth::pcproc::mapping::{REAL6_NAMES, REDUCED9_NAMES};
use aerosynth::pcproc::{
    class_histogram, grid_downsample, map_classes, sample_fixed_count, sample_sphere, tile_blocks, volume_density_histogram, ClassMapping,
    DensityRegion, Tile,
};
use aerosynth::recon::{backproject_proxy, simulate_reconstruction, Reconstruction};
use aerosynth::render::{build_bvh, read_image, render, write_image, DepthLabelImage};
use aerosynth::rng::derive_seed;
use aerosynth::scene::{
    assemble_scene, extrude_buildings, generate_terrain, place_objects, procedural_layout, sculpt_ground_details, to_geojson,
    AssetCatalog, GroundCover, HeightField, PlacedObject, PlacementWarning,
};
use aerosynth::{LabeledMesh, LabeledPointCloud};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::manifest::{file_record, Audit, RunManifest, StageRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    GenScene,
    PlanFlight,
    Render,
    Reconstruct,
    Annotate,
    Postprocess,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 7] =
        [Stage::GenScene, Stage::PlanFlight, Stage::Render, Stage::Reconstruct, Stage::Annotate, Stage::Postprocess, Stage::Eval];

    pub fn name(self) -> &'static str {
        match self {
            Stage::GenScene => "gen-scene",
            Stage::PlanFlight => "plan-flight",
            Stage::Render => "render",
            Stage::Reconstruct => "reconstruct",
            Stage::Annotate => "annotate",
            Stage::Postprocess => "postprocess",
            Stage::Eval => "eval",
        }
    }

    pub fn from_name(name: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|s| s.name() == name)
    }

    fn enabled(self, cfg: &RunConfig) -> bool {
        let t = &cfg.stages;
        match self {
            Stage::GenScene => t.gen_scene,
            Stage::PlanFlight => t.plan_flight,
            Stage::Render => t.render,
            Stage::Reconstruct => t.reconstruct,
            Stage::Annotate => t.annotate,
            Stage::Postprocess => t.postprocess,
            Stage::Eval => t.eval,
        }
    }
}

/// Artifact locations, relative to the output directory.
pub mod paths {
    pub const TERRAIN: &str = "scene/terrain.txt";
    pub const LAYOUT: &str = "scene/layout.geojson";
    pub const OBJECTS: &str = "scene/objects.json";
    pub const MESH: &str = "scene/mesh.ply";
    pub const PLAN: &str = "flight/plan.json";
    pub const FLOWN: &str = "flight/flown.json";
    pub const IMAGES: &str = "render";
    pub const RECON: &str = "reconstruct/cloud.ply";
    pub const TRACE: &str = "reconstruct/trace.bin";
    pub const LABELED: &str = "annotate/labeled.ply";
    pub const DOWNSAMPLED: &str = "postprocess/downsampled.ply";
    pub const REAL6: &str = "postprocess/real6.ply";
    pub const REFERENCE: &str = "eval/reference.ply";
    pub const MANIFEST: &str = "manifest.json";
}

#[derive(Debug)]
pub struct StageFailure {
    pub stage: Stage,
    pub error: anyhow::Error,
    pub manifest: RunManifest,
}

#[derive(Default)]
struct StageOutput {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    warnings: Vec<String>,
    details: serde_json::Value,
    audit: Option<Audit>,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    out: &'a Path,
    seed: u64,
}

impl Ctx<'_> {
    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    /// Output path with its parent directory created.
    fn create(&self, rel: &str) -> Result<PathBuf> {
        let p = self.path(rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        Ok(p)
    }

    fn open(&self, rel: &str) -> Result<BufReader<File>> {
        let p = self.path(rel);
        Ok(BufReader::new(File::open(&p).with_context(|| format!("opening {} (run the earlier stages first)", p.display()))?))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(v)? + "\n"))
}

fn load_manifest(out: &Path, cfg: &RunConfig) -> RunManifest {
    let existing = fs::read_to_string(out.join(paths::MANIFEST)).ok().and_then(|t| serde_json::from_str::<RunManifest>(&t).ok());
    match existing {
        Some(mut m) if m.config == *cfg => {
            m.failed_stage = None;
            m.error = None;
            m
        }
        _ => RunManifest::new(cfg.clone()),
    }
}

fn save_manifest(out: &Path, m: &RunManifest) -> Result<()> {
    write_json(&out.join(paths::MANIFEST), m)
}

/// Runs `stages` in dependency order, writing the manifest after each one.
/// Stages disabled in the config are skipped.
pub fn run_stages(cfg: &RunConfig, out: &Path, stages: &[Stage]) -> Result<RunManifest, Box<StageFailure>> {
    let mut order: Vec<Stage> = stages.to_vec();
    order.sort();
    order.dedup();
    let mut manifest = load_manifest(out, cfg);
    for stage in order {
        if !stage.enabled(cfg) {
            log::info!("{}: disabled in config, skipped", stage.name());
            continue;
        }
        log::info!("{}: running", stage.name());
        let ctx = Ctx { cfg, out, seed: derive_seed(cfg.seed, stage.name()) };
        let start = Instant::now();
        let result = fs::create_dir_all(out).context("creating output directory").and_then(|_| run_one(stage, &ctx)).and_then(|o| {
            let rec = |ps: &[PathBuf]| ps.iter().map(|p| file_record(out, p)).collect::<std::io::Result<Vec<_>>>();
            Ok((rec(&o.inputs)?, rec(&o.outputs)?, o))
        });
        match result {
            Ok((inputs, outputs, o)) => {
                let seconds = start.elapsed().as_secs_f64();
                log::info!("{}: done in {seconds:.1} s", stage.name());
                if o.audit.is_some() {
                    manifest.audit = o.audit;
                }
                manifest.record(StageRecord {
                    name: stage.name().into(),
                    seed: ctx.seed,
                    inputs,
                    outputs,
                    seconds,
                    warnings: o.warnings,
                    details: o.details,
                });
                let _ = save_manifest(out, &manifest);
            }
            Err(error) => {
                manifest.failed_stage = Some(stage.name().into());
                manifest.error = Some(format!("{error:#}"));
                let _ = save_manifest(out, &manifest);
                return Err(Box::new(StageFailure { stage, error, manifest }));
            }
        }
    }
    save_manifest(out, &manifest).map_err(|error| Box::new(StageFailure { stage: Stage::Eval, error, manifest: manifest.clone() }))?;
    Ok(manifest)
}

fn run_one(stage: Stage, ctx: &Ctx) -> Result<StageOutput> {
    match stage {
        Stage::GenScene => gen_scene(ctx),
        Stage::PlanFlight => plan_flight(ctx),
        Stage::Render => render_images(ctx),
        Stage::Reconstruct => reconstruct(ctx),
        Stage::Annotate => annotate(ctx),
        Stage::Postprocess => postprocess(ctx),
        Stage::Eval => evaluate(ctx),
    }
}

#[derive(Serialize, Deserialize)]
struct ObjectsFile {
    buildings: usize,
    objects: Vec<PlacedObject>,
    placed_per_rule: Vec<usize>,
    warnings: Vec<PlacementWarning>,
}

fn gen_scene(ctx: &Ctx) -> Result<StageOutput> {
    let s = &ctx.cfg.scene;
    let hf = generate_terrain(derive_seed(ctx.seed, "terrain"), s.extent, s.cell_size, s.relief_amplitude)?;
    let hf = sculpt_ground_details(&hf, derive_seed(ctx.seed, "ground-details"), s.ditch_rate, s.bump_rate)?;
    let layers = procedural_layout(ctx.seed, hf.extent(), &s.layout)?;
    let buildings = extrude_buildings(&layers.footprints, &hf)?;
    let catalog = AssetCatalog::builtin();
    let first_instance = layers.footprints.len() as u32 + 1;
    let placement =
        place_objects(&s.placement, &layers.roads, &layers.footprints, &hf, &catalog, derive_seed(ctx.seed, "placement"), first_instance)?;
    let mesh = assemble_scene(
        &hf,
        &buildings,
        &placement.objects,
        &catalog,
        &layers.roads,
        &layers.footprints,
        &GroundCover { dirt_buffer: s.dirt_buffer },
    )?;

    let mut warnings: Vec<String> = placement.warnings.iter().map(|w| format!("placement rule {}: {}", w.rule, w.message)).collect();
    if layers.footprints.len() < s.layout.building_count {
        warnings.push(format!("layout fitted {} of {} buildings", layers.footprints.len(), s.layout.building_count));
    }
    let terrain = ctx.create(paths::TERRAIN)?;
    write_text(&terrain, &hf.to_text())?;
    let layout = ctx.create(paths::LAYOUT)?;
    write_json(&layout, &to_geojson(&layers))?;
    let objects = ctx.create(paths::OBJECTS)?;
    write_json(
        &objects,
        &ObjectsFile {
            buildings: layers.footprints.len(),
            objects: placement.objects.clone(),
            placed_per_rule: placement.placed_per_rule.clone(),
            warnings: placement.warnings.clone(),
        },
    )?;
    let mesh_path = ctx.create(paths::MESH)?;
    write_mesh_ply(File::create(&mesh_path)?, &mesh)?;
    Ok(StageOutput {
        outputs: vec![terrain, layout, objects, mesh_path],
        warnings,
        details: json!({
            "buildings": layers.footprints.len(),
            "objects": placement.objects.len(),
            "placed_per_rule": placement.placed_per_rule,
            "triangles": mesh.triangle_count(),
        }),
        ..Default::default()
    })
}

fn load_mesh(ctx: &Ctx) -> Result<LabeledMesh> {
    read_mesh_ply(ctx.open(paths::MESH)?).context("reading scene mesh")
}

fn load_plan(ctx: &Ctx, rel: &str) -> Result<FlightPlan> {
    Ok(serde_json::from_reader(ctx.open(rel)?)?)
}

fn plan_flight(ctx: &Ctx) -> Result<StageOutput> {
    let f = &ctx.cfg.flight;
    let mut text = String::new();
    ctx.open(paths::TERRAIN)?.read_to_string(&mut text)?;
    let hf = HeightField::from_text(&text)?;
    let intrinsics = CameraIntrinsics::from_hfov(f.image_width, f.image_height, f.hfov_deg);
    let plan = plan_crosshatch(hf.extent(), f.altitude, f.forward_overlap, f.side_overlap, intrinsics)?.with_base_elevation(hf.min_max().1);
    let flown = apply_wind_jitter(&plan, ctx.seed, f.wind_sigma_position, f.wind_sigma_angle_deg.to_radians())?;
    let plan_path = ctx.create(paths::PLAN)?;
    write_json(&plan_path, &plan)?;
    let flown_path = ctx.create(paths::FLOWN)?;
    write_json(&flown_path, &flown)?;
    let (along, across) = plan.spacing();
    Ok(StageOutput {
        inputs: vec![ctx.path(paths::TERRAIN)],
        outputs: vec![plan_path, flown_path],
        details: json!({ "images": plan.len(), "lines": plan.lines.len(), "along_track_spacing": along, "cross_track_spacing": across }),
        ..Default::default()
    })
}

fn image_path(i: usize) -> String {
    format!("{}/img_{i:04}.dli", paths::IMAGES)
}

fn render_images(ctx: &Ctx) -> Result<StageOutput> {
    let mesh = load_mesh(ctx)?;
    let flown = load_plan(ctx, paths::FLOWN)?;
    let bvh = build_bvh(&mesh)?;
    // Stale images from a larger earlier plan would be read back by annotate.
    let dir = ctx.path(paths::IMAGES);
    if dir.exists() {
        fs::remove_dir_all(&dir)?;
    }
    let mut outputs = Vec::new();
    let mut hits = 0usize;
    for (i, cam) in flown.cameras().enumerate() {
        let img = render(&cam, &bvh, &mesh)?;
        hits += img.hit_count();
        let p = ctx.create(&image_path(i))?;
        let mut w = BufWriter::new(File::create(&p)?);
        write_image(&mut w, &img)?;
        w.flush()?;
        outputs.push(p);
    }
    Ok(StageOutput {
        inputs: vec![ctx.path(paths::MESH), ctx.path(paths::FLOWN)],
        outputs,
        details: json!({ "images": flown.len(), "hit_pixels": hits }),
        ..Default::default()
    })
}

const TRACE_MAGIC: &[u8; 8] = b"AEROTRC1";

fn write_trace(path: &Path, rec: &Reconstruction) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(TRACE_MAGIC)?;
    w.write_all(&(rec.trace.source_triangle.len() as u64).to_le_bytes())?;
    for (t, &o) in rec.trace.source_triangle.iter().zip(&rec.trace.outlier) {
        w.write_all(&t.to_le_bytes())?;
        w.write_all(&[o as u8])?;
    }
    w.flush()?;
    Ok(())
}

fn read_trace(r: impl Read) -> Result<Vec<(u32, bool)>> {
    let mut r = BufReader::new(r);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != TRACE_MAGIC {
        bail!("not a trace file");
    }
    let mut n = [0u8; 8];
    r.read_exact(&mut n)?;
    let n = u64::from_le_bytes(n) as usize;
    let mut buf = vec![0u8; n * 5];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(5).map(|c| (u32::from_le_bytes([c[0], c[1], c[2], c[3]]), c[4] != 0)).collect())
}

fn reconstruct(ctx: &Ctx) -> Result<StageOutput> {
    let mesh = load_mesh(ctx)?;
    let flown = load_plan(ctx, paths::FLOWN)?;
    let bvh = build_bvh(&mesh)?;
    let mut params = ctx.cfg.noise.clone();
    params.seed = ctx.seed;
    let rec = simulate_reconstruction(&mesh, &bvh, &flown, &params)?;
    let cloud = ctx.create(paths::RECON)?;
    write_cloud_ply(File::create(&cloud)?, &rec.cloud)?;
    let trace = ctx.create(paths::TRACE)?;
    write_trace(&trace, &rec)?;
    Ok(StageOutput {
        inputs: vec![ctx.path(paths::MESH), ctx.path(paths::FLOWN)],
        outputs: vec![cloud, trace],
        details: serde_json::to_value(&rec.stats)?,
        ..Default::default()
    })
}

fn load_images(ctx: &Ctx) -> Result<(Vec<DepthLabelImage>, Vec<PathBuf>)> {
    let flown = load_plan(ctx, paths::FLOWN)?;
    let mut images = Vec::with_capacity(flown.len());
    let mut inputs = Vec::with_capacity(flown.len());
    for i in 0..flown.len() {
        images.push(read_image(ctx.open(&image_path(i))?).with_context(|| format!("reading image {i}"))?);
        inputs.push(ctx.path(&image_path(i)));
    }
    Ok((images, inputs))
}

/// At most this many points are probed for the boundary estimate.
const BOUNDARY_SAMPLES: usize = 20_000;

fn annotate(ctx: &Ctx) -> Result<StageOutput> {
    let params = &ctx.cfg.transfer;
    let (images, mut inputs) = load_images(ctx)?;
    let proxy = backproject_proxy(&images)?;
    drop(images);
    let recon = read_cloud_ply(ctx.open(paths::RECON)?)?;
    let index = build_point_index(&proxy)?;
    let (transferred, unmatched) = transfer_counted(&recon, &proxy, &index, params)?;
    let (labeled, connectivity) = enforce_ground_connectivity(&transferred, params)?;
    let stride = labeled.len().div_ceil(BOUNDARY_SAMPLES).max(1);
    let probe: Vec<usize> = (0..labeled.len()).step_by(stride).collect();
    let boundary = boundary_fraction(&labeled.select(&probe), &proxy, &index, params.max_nn_distance);

    let objects: ObjectsFile = serde_json::from_reader(ctx.open(paths::OBJECTS)?)?;
    let audit = audit(&labeled, &objects, unmatched, boundary);
    let mut warnings = Vec::new();
    if !audit.instances_missing.is_empty() {
        warnings.push(format!("{} placed instances received no points", audit.instances_missing.len()));
    }
    if connectivity.no_ground {
        warnings.push("cloud has no ground points".into());
    }
    let out = ctx.create(paths::LABELED)?;
    write_cloud_ply(File::create(&out)?, &labeled)?;
    inputs.extend([ctx.path(paths::FLOWN), ctx.path(paths::RECON), ctx.path(paths::OBJECTS)]);
    Ok(StageOutput {
        inputs,
        outputs: vec![out],
        warnings,
        details: json!({
            "proxy_points": proxy.len(),
            "unlabeled_fraction": audit.unlabeled_fraction,
            "boundary_fraction": boundary,
            "connectivity": connectivity,
        }),
        audit: Some(audit),
    })
}

fn audit(labeled: &LabeledPointCloud, objects: &ObjectsFile, unmatched: usize, boundary: f64) -> Audit {
    let mut per_class = [0usize; CLASS_COUNT];
    let mut per_instance: BTreeMap<u32, usize> = BTreeMap::new();
    for (&s, &i) in labeled.semantic.iter().zip(&labeled.instance) {
        if (s as usize) < CLASS_COUNT {
            per_class[s as usize] += 1;
        }
        if i != 0 {
            *per_instance.entry(i).or_default() += 1;
        }
    }
    let classes_present: Vec<String> =
        (0..FINE_CLASS_COUNT).filter(|&c| per_class[c] > 0).map(|c| SemanticClass::ALL[c].name().to_string()).collect();
    let mut placed: BTreeSet<u32> = (1..=objects.buildings as u32).collect();
    placed.extend(objects.objects.iter().filter(|o| o.semantic.is_instance_capable()).map(|o| o.instance_id));
    let instances_missing: Vec<u32> = placed.iter().copied().filter(|i| !per_instance.contains_key(i)).collect();
    Audit {
        points: labeled.len(),
        unlabeled_points: unmatched,
        unlabeled_fraction: if labeled.is_empty() { 0.0 } else { unmatched as f64 / labeled.len() as f64 },
        boundary_fraction: boundary,
        fine_classes_present: classes_present.len(),
        classes_present,
        placed_instances: placed.len(),
        instances_with_points: placed.len() - instances_missing.len(),
        instances_missing,
    }
}

#[derive(Serialize)]
struct TileEntry {
    file: String,
    points: usize,
    padded: bool,
    bounds: aerosynth::pcproc::TileBounds,
}

fn write_tile(ctx: &Ctx, rel: String, tile: &Tile, entries: &mut Vec<TileEntry>, outputs: &mut Vec<PathBuf>) -> Result<()> {
    let p = ctx.create(&rel)?;
    write_cloud_ply(File::create(&p)?, &tile.points)?;
    entries.push(TileEntry { file: rel, points: tile.points.len(), padded: tile.padded, bounds: tile.bounds.clone() });
    outputs.push(p);
    Ok(())
}

fn postprocess(ctx: &Ctx) -> Result<StageOutput> {
    let p = &ctx.cfg.postprocess;
    let labeled = read_cloud_ply(ctx.open(paths::LABELED)?)?;
    let down = grid_downsample(&labeled, p.spacing)?;
    let mut outputs = Vec::new();
    let save = |rel: &str, cloud: &LabeledPointCloud, outputs: &mut Vec<PathBuf>| -> Result<()> {
        let path = ctx.create(rel)?;
        write_cloud_ply(File::create(&path)?, cloud)?;
        outputs.push(path);
        Ok(())
    };
    save(paths::DOWNSAMPLED, &down, &mut outputs)?;

    let real6 = ClassMapping::synthetic_to_real6();
    let inst9 = ClassMapping::instance14_to_9();
    for (rel, m) in [("postprocess/mapping_real6.txt", &real6), ("postprocess/mapping_instance9.txt", &inst9)] {
        let path = ctx.create(rel)?;
        write_text(&path, &m.to_text())?;
        outputs.push(path);
    }
    save(paths::REAL6, &map_classes(&down, &real6)?, &mut outputs)?;

    let hist = class_histogram(&down);
    for (rel, text) in [("postprocess/class_histogram.csv", hist.to_csv()), ("postprocess/class_histogram.dat", hist.to_plot_data())] {
        let path = ctx.create(rel)?;
        write_text(&path, &text)?;
        outputs.push(path);
    }
    let mut warnings = Vec::new();
    if !down.is_empty() {
        let b = down.bounds();
        let c = b.center();
        let regions = [
            ("postprocess/density_sphere.csv", DensityRegion::Sphere { center: c.into(), radius: p.sphere_radius }),
            ("postprocess/density_height.csv", DensityRegion::Box { min: b.min.into(), max: (b.max + aerosynth::geom::Vec3::repeat(1e-9)).into(), axis: 2 }),
        ];
        for (rel, region) in regions {
            let h = volume_density_histogram(&down, &region, p.histogram_bins)?;
            let path = ctx.create(rel)?;
            write_text(&path, &h.to_csv())?;
            outputs.push(path);
        }

        let mut entries = Vec::new();
        for (k, tile) in tile_blocks(&down, p.block_edge)?.iter().enumerate() {
            write_tile(ctx, format!("postprocess/tiles/block_{k:03}.ply"), tile, &mut entries, &mut outputs)?;
        }
        write_tile(ctx, "postprocess/tiles/sphere.ply".into(), &sample_sphere(&down, c, p.sphere_radius)?, &mut entries, &mut outputs)?;
        let nearest = sample_fixed_count(&down, c, p.fixed_count)?;
        if nearest.padded {
            warnings.push(format!("fixed-count sample padded: cloud has {} points, {} requested", down.len(), p.fixed_count));
        }
        write_tile(ctx, "postprocess/tiles/nearest.ply".into(), &nearest, &mut entries, &mut outputs)?;
        let path = ctx.create("postprocess/tiles/tiles.json")?;
        write_json(&path, &entries)?;
        outputs.push(path);
    } else {
        warnings.push("labeled cloud is empty".into());
    }
    let unreached: Vec<String> = real6.unreached_targets().iter().map(|&t| real6.target_names[t as usize].clone()).collect();
    if !unreached.is_empty() {
        warnings.push(format!("mapping {} never reaches {}", real6.name, unreached.join(", ")));
    }
    Ok(StageOutput {
        inputs: vec![ctx.path(paths::LABELED)],
        outputs,
        warnings,
        details: json!({ "input_points": labeled.len(), "downsampled_points": down.len() }),
        ..Default::default()
    })
}

/// Labels of the surfaces the reconstructed points came from.
fn reference_cloud(ctx: &Ctx) -> Result<LabeledPointCloud> {
    let mesh = load_mesh(ctx)?;
    let mut cloud = read_cloud_ply(ctx.open(paths::RECON)?)?;
    let trace = read_trace(ctx.open(paths::TRACE)?)?;
    if trace.len() != cloud.len() {
        bail!("trace has {} entries for {} points", trace.len(), cloud.len());
    }
    for (i, &(t, _)) in trace.iter().enumerate() {
        let t = t as usize;
        if t >= mesh.triangle_count() {
            bail!("trace references triangle {t} of {}", mesh.triangle_count());
        }
        cloud.semantic[i] = mesh.tri_semantic[t].id();
        cloud.instance[i] = mesh.tri_instance[t];
    }
    Ok(cloud)
}

/// Scores `pred` against `gt` point by point and writes the report files.
/// Returns the report plus the number of points skipped because either
/// side was unlabeled.
pub fn evaluate_clouds(gt: &LabeledPointCloud, pred: &LabeledPointCloud, dir: &Path, include_prediction_only: bool) -> Result<(SegmentationReport, usize, Vec<PathBuf>)> {
    if gt.len() != pred.len() {
        bail!("ground truth has {} points, prediction {}", gt.len(), pred.len());
    }
    let keep: Vec<usize> = (0..gt.len()).filter(|&i| gt.semantic[i] != UNLABELED && pred.semantic[i] != UNLABELED).collect();
    let skipped = gt.len() - keep.len();
    let (gt, pred) = (gt.select(&keep), pred.select(&keep));
    fs::create_dir_all(dir)?;
    let mut outputs = Vec::new();

    let fine_names: Vec<String> = SemanticClass::ALL.iter().map(|c| c.name().to_string()).collect();
    let fine = semantic_scores(&confusion(&gt.semantic, &pred.semantic, CLASS_COUNT, None)?)?;
    let real6 = ClassMapping::synthetic_to_real6();
    let (g6, p6) = (map_classes(&gt, &real6)?, map_classes(&pred, &real6)?);
    let six = semantic_scores(&confusion(&g6.semantic, &p6.semantic, REAL6_NAMES.len(), None)?)?;
    let six_names: Vec<String> = REAL6_NAMES.iter().map(|s| s.to_string()).collect();

    let instance_classes: Vec<u8> = SemanticClass::INSTANCE_CAPABLE.iter().map(|c| c.id()).collect();
    let gt_instances = instances_from_labels(&gt.semantic, &gt.instance, &instance_classes);
    let preds: Vec<InstancePrediction> = instances_from_labels(&pred.semantic, &pred.instance, &instance_classes)
        .into_iter()
        .map(|g| InstancePrediction { class: g.class, points: g.points, confidence: 1.0 })
        .collect();
    let ap = instance_ap(&gt_instances, &preds, gt.len(), &ScanNetThresholds::all())?;
    let report = SegmentationReport::new(fine_names.clone(), Some(fine.clone()), Some(&ap), include_prediction_only)?;
    let instance_names: Vec<String> = SemanticClass::INSTANCE_CAPABLE.iter().map(|c| c.name().to_string()).collect();

    let mut put = |name: &str, text: String| -> Result<()> {
        let p = dir.join(name);
        write_text(&p, &text)?;
        outputs.push(p);
        Ok(())
    };
    put("semantic_fine.csv", semantic_report_csv(&fine, &fine_names))?;
    put("semantic_real6.csv", semantic_report_csv(&six, &six_names))?;
    let mean = report.instance_mean.clone().expect("instance table present");
    put("instance.csv", instance_report_csv(&report.instance_classes, &mean, &instance_names))?;
    let reduced = ClassMapping::instance14_to_9();
    let remap = |class: u8| reduced.get(class).expect("instance classes are mapped");
    let gt9: Vec<_> = gt_instances.iter().map(|g| aerosynth::eval::GtInstance { class: remap(g.class), points: g.points.clone() }).collect();
    let pred9: Vec<_> = preds.iter().map(|p| InstancePrediction { class: remap(p.class), ..p.clone() }).collect();
    let ap9 = instance_ap(&gt9, &pred9, gt.len(), &ScanNetThresholds::all())?;
    let (rows9, mean9) = ap9.summary(include_prediction_only)?;
    let names9: Vec<String> = REDUCED9_NAMES.iter().map(|s| s.to_string()).collect();
    put("instance_reduced9.csv", instance_report_csv(&rows9, &mean9, &names9))?;
    put(
        "report.json",
        serde_json::to_string_pretty(&json!({
            "evaluated_points": keep.len(),
            "skipped_unlabeled": skipped,
            "fine": report,
            "real6": six,
        }))? + "\n",
    )?;
    Ok((report, skipped, outputs))
}

fn evaluate(ctx: &Ctx) -> Result<StageOutput> {
    let e = &ctx.cfg.eval;
    let (gt, pred, inputs, mut outputs) = match (&e.gt, &e.pred) {
        (Some(g), Some(p)) => {
            let load = |p: &PathBuf| -> Result<LabeledPointCloud> {
                aerosynth::io::load_cloud(p).with_context(|| format!("reading {}", p.display()))
            };
            (load(g)?, load(p)?, Vec::new(), Vec::new())
        }
        _ => {
            let reference = reference_cloud(ctx)?;
            let path = ctx.create(paths::REFERENCE)?;
            write_cloud_ply(File::create(&path)?, &reference)?;
            let pred = read_cloud_ply(ctx.open(paths::LABELED)?)?;
            let inputs = vec![ctx.path(paths::MESH), ctx.path(paths::RECON), ctx.path(paths::TRACE), ctx.path(paths::LABELED)];
            (reference, pred, inputs, vec![path])
        }
    };
    let (report, skipped, files) = evaluate_clouds(&gt, &pred, &ctx.path("eval"), e.include_prediction_only_classes)?;
    outputs.extend(files);
    let s = report.semantic.as_ref().expect("semantic scores present");
    let mean = report.instance_mean.as_ref().expect("instance scores present");
    Ok(StageOutput {
        inputs,
        outputs,
        warnings: if skipped > 0 { vec![format!("{skipped} unlabeled points left out of scoring")] } else { Vec::new() },
        details: json!({ "miou": s.miou, "oacc": s.oacc, "map": mean.ap, "ap50": mean.ap50, "ap25": mean.ap25 }),
        ..Default::default()
    })
}
