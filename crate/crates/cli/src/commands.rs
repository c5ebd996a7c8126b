use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use contactfit::body::{pose_body, BodyModel, PoseVector, PART_NAMES};
use contactfit::contact::CorrespondenceSet;
use contactfit::eval::{contact_f1, gt_contact_extract, pa_cd, DEFAULT_CONTACT_THRESHOLD, DEFAULT_SAMPLES};
use contactfit::fit::{fit, Camera, FitConfig, FitInputs, SilhouetteMask};
use contactfit::io::{self, AnnotationDocument};
use contactfit::retrieval::{
    nn_contact_annotation, nn_objects, oracle_query, refine_contacts, AnnotationStore, EmbeddingStore, OracleResponse,
    DEFAULT_K,
};
use contactfit::synth;
use serde::{Deserialize, Serialize};

use crate::annotate::{prepare_patches, transfer_all, PatchClicks};
use crate::oracle_http::client_from_env;
use crate::service::{self, SessionAssets};

#[derive(Debug, Parser)]
#[command(name = "contactfit", version, about = "Contact-guided human-object registration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transfer body contact patches onto an object from two clicks per patch.
    Transfer(TransferArgs),
    /// Fit object pose, scale and contacting limbs to an annotation.
    Fit(FitArgs),
    /// Nearest objects by embedding, and optionally the nearest contact annotation.
    Retrieve(RetrieveArgs),
    /// Adjust predicted body contacts with oracle part hints.
    Refine(RefineArgs),
    /// Procrustes-aligned Chamfer distances and contact F1 against ground truth.
    Eval(EvalArgs),
    /// Write a synthetic scene with every input the other commands need.
    Synth(SynthArgs),
    /// Run the annotation HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    #[arg(long)]
    pub body: PathBuf,
    /// JSON array of body vertex indices.
    #[arg(long)]
    pub contacts: PathBuf,
    #[arg(long)]
    pub object: PathBuf,
    /// JSON array of `{patch_id, start, direction}`.
    #[arg(long)]
    pub clicks: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Metric scale applied to the object before transfer.
    #[arg(long, default_value_t = 1.0)]
    pub object_scale: f64,
    /// Defaults to the object file stem.
    #[arg(long)]
    pub object_id: Option<String>,
    #[arg(long, default_value = "")]
    pub image_id: String,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub annotation: PathBuf,
    #[arg(long)]
    pub body_model: PathBuf,
    #[arg(long)]
    pub camera: PathBuf,
    /// Directory holding `object` and `human` masks (`.pgm` or `.pbm`).
    #[arg(long)]
    pub masks: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Object mesh in its own frame.
    #[arg(long)]
    pub object: PathBuf,
    /// JSON `{pose, scale}` with the initial body pose and object scale.
    #[arg(long)]
    pub init: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the fitted `human.obj` and `object.obj` here.
    #[arg(long)]
    pub mesh_dir: Option<PathBuf>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub stages: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    /// Binary embedding store.
    #[arg(long)]
    pub store: PathBuf,
    /// JSON array with the query embedding.
    #[arg(long)]
    pub query: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// JSON contact annotation records.
    #[arg(long, requires = "contacts")]
    pub annotations: Option<PathBuf>,
    /// JSON array of body vertex indices to match against the annotations.
    #[arg(long, requires = "annotations")]
    pub contacts: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    /// JSON array of predicted body contact vertices.
    #[arg(long)]
    pub contacts: PathBuf,
    #[arg(long)]
    pub body_model: PathBuf,
    #[arg(long)]
    pub image: String,
    #[arg(long)]
    pub object_label: String,
    /// Canned oracle answers, keyed by image id.
    #[arg(long)]
    pub oracle_file: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    /// Meters.
    #[arg(long, default_value_t = DEFAULT_CONTACT_THRESHOLD)]
    pub contact_threshold: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Only `grasp` is available.
    #[arg(long)]
    pub scenario: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory with one subdirectory per session.
    #[arg(long)]
    pub assets: PathBuf,
}

/// Initial body pose and object scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitState {
    pub pose: PoseVector,
    pub scale: f64,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Transfer(a) => transfer(a),
        Command::Fit(a) => fit_command(a),
        Command::Retrieve(a) => retrieve(a),
        Command::Refine(a) => refine(a),
        Command::Eval(a) => eval(a),
        Command::Synth(a) => synth_command(a),
        Command::Serve(a) => serve(a),
    }
}

fn write_output<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => io::save_json(value, p).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{}", io::to_json(value)),
    }
    Ok(())
}

fn load_contacts(path: &Path) -> Result<BTreeSet<usize>> {
    io::load_json(path).with_context(|| format!("reading contacts {}", path.display()))
}

fn load_mesh(path: &Path) -> Result<contactfit::SurfaceMesh> {
    io::load_mesh_file(path).with_context(|| format!("reading mesh {}", path.display()))
}

fn transfer(a: TransferArgs) -> Result<()> {
    let body = load_mesh(&a.body)?;
    let contacts = load_contacts(&a.contacts)?;
    let object = load_mesh(&a.object)?;
    let clicks: Vec<PatchClicks> = io::load_json(&a.clicks).context("reading clicks")?;
    if !(a.object_scale > 0.0 && a.object_scale.is_finite()) {
        bail!("--object-scale must be positive");
    }
    let object_id = a.object_id.clone().unwrap_or_else(|| {
        a.object
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let outcome = transfer_all(
        &body,
        &contacts,
        &object,
        &object_id,
        a.object_scale,
        &clicks,
        &a.image_id,
    )?;
    for id in &outcome.skipped {
        eprintln!("patch {id}: no usable axis, skipped");
    }
    for id in &outcome.unclicked {
        eprintln!("patch {id}: no clicks, left out");
    }
    for (id, vs) in &outcome.failed {
        eprintln!("patch {id}: {} vertices could not be placed", vs.len());
    }
    io::save_annotation(&outcome.document, &a.out)?;
    Ok(())
}

fn find_mask(dir: &Path, name: &str) -> Result<SilhouetteMask> {
    for ext in ["pgm", "pbm"] {
        let p = dir.join(format!("{name}.{ext}"));
        if p.exists() {
            return io::load_mask_file(&p).with_context(|| format!("reading {}", p.display()));
        }
    }
    bail!("no {name}.pgm or {name}.pbm in {}", dir.display())
}

/// All patch correspondences of a document, each body vertex once.
pub fn document_correspondences(doc: &AnnotationDocument) -> CorrespondenceSet {
    let mut all = CorrespondenceSet::default();
    for p in &doc.patches {
        all.merge(&p.correspondences);
    }
    all
}

fn fit_command(a: FitArgs) -> Result<()> {
    let doc = io::load_annotation(&a.annotation).context("reading annotation")?;
    let model = io::load_body_model(&a.body_model).context("reading body model")?;
    let camera: Camera = io::load_json(&a.camera).context("reading camera")?;
    let object = load_mesh(&a.object)?;
    let init: InitState = io::load_json(&a.init).context("reading init")?;
    let mut config: FitConfig = match &a.config {
        Some(p) => io::load_json(p).context("reading config")?,
        None => FitConfig::default(),
    };
    if let Some(n) = a.iterations {
        config.iterations = n;
    }
    if let Some(n) = a.stages {
        config.stages = n;
    }
    let object_mask = find_mask(&a.masks, "object")?;
    let human_mask = find_mask(&a.masks, "human")?;
    let correspondences = document_correspondences(&doc);
    let result = fit(
        FitInputs {
            body_model: &model,
            init_pose: init.pose,
            camera,
            object: &object,
            init_scale: init.scale,
            correspondences: &correspondences,
            object_mask: &object_mask,
            human_mask: &human_mask,
        },
        &config,
    )?;
    for s in &result.stages {
        eprintln!(
            "stage {}: loss {:.6} after {} iterations ({:.2} s)",
            s.stage,
            s.loss,
            s.trace.len(),
            s.seconds
        );
    }
    io::save_json(&result, &a.out)?;
    if let Some(dir) = &a.mesh_dir {
        fs::create_dir_all(dir)?;
        io::save_mesh_file(&pose_body(&model, &result.theta)?, dir.join("human.obj"))?;
        io::save_mesh_file(&result.object_mesh(&object), dir.join("object.obj"))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct RetrievedObject {
    id: String,
    score: f64,
    mesh_path: String,
    category: String,
}

#[derive(Debug, Serialize)]
struct RetrievedAnnotation {
    id: u64,
    iou: f64,
    image_id: String,
    object_id: String,
    object_scale: f64,
}

#[derive(Debug, Serialize)]
struct RetrieveReport {
    objects: Vec<RetrievedObject>,
    #[serde(skip_serializing_if = "Option::is_none")]
    annotation: Option<RetrievedAnnotation>,
}

fn retrieve(a: RetrieveArgs) -> Result<()> {
    let store = EmbeddingStore::load(&a.store).with_context(|| format!("reading store {}", a.store.display()))?;
    let query: Vec<f32> = io::load_json(&a.query).context("reading query")?;
    let objects = nn_objects(&store, &query, a.k)?
        .into_iter()
        .map(|s| RetrievedObject {
            id: s.record.id.clone(),
            score: s.score,
            mesh_path: s.record.mesh_path.clone(),
            category: s.record.category.clone(),
        })
        .collect();
    let annotation = match (&a.annotations, &a.contacts) {
        (Some(ann), Some(c)) => {
            let annotations = AnnotationStore::load(ann)?;
            annotations.check_objects(&store)?;
            let (r, iou) = nn_contact_annotation(&annotations, &load_contacts(c)?)?;
            Some(RetrievedAnnotation {
                id: r.id,
                iou,
                image_id: r.image_id.clone(),
                object_id: r.object_id.clone(),
                object_scale: r.object_scale,
            })
        }
        _ => None,
    };
    write_output(&RetrieveReport { objects, annotation }, a.out.as_deref())
}

/// Vertex sets of every body part.
pub fn part_map(model: &BodyModel) -> BTreeMap<String, BTreeSet<usize>> {
    PART_NAMES
        .iter()
        .map(|p| {
            let vs = model.part_vertices(p).expect("vocabulary part");
            (p.to_string(), vs.into_iter().collect())
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct RefineReport {
    contacts: BTreeSet<usize>,
    oracle: OracleResponse,
}

fn refine(a: RefineArgs) -> Result<()> {
    let contacts = load_contacts(&a.contacts)?;
    let model = io::load_body_model(&a.body_model)?;
    let client = client_from_env(a.oracle_file.as_deref())?;
    let oracle = oracle_query(&client, &a.image, &a.object_label)?;
    let refined = refine_contacts(&contacts, &oracle, &part_map(&model))?;
    write_output(
        &RefineReport {
            contacts: refined,
            oracle,
        },
        a.out.as_deref(),
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalItem {
    pub name: String,
    /// Centimeters.
    pub pa_cd_human: f64,
    pub pa_cd_object: f64,
    pub pa_cd_combined: f64,
    /// Body contact F1 at the threshold; absent when the body topologies
    /// differ.
    pub contact_f1: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub items: Vec<EvalItem>,
    pub mean_pa_cd_human: f64,
    pub mean_pa_cd_object: f64,
    pub mean_pa_cd_combined: f64,
    pub mean_contact_f1: Option<f64>,
}

fn scene_dirs(root: &Path) -> Result<Vec<(String, PathBuf)>> {
    if root.join("human.obj").exists() {
        return Ok(vec![(String::new(), root.to_path_buf())]);
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(root).with_context(|| format!("listing {}", root.display()))? {
        let path = entry?.path();
        if path.join("human.obj").exists() {
            out.push((path.file_name().unwrap().to_string_lossy().into_owned(), path));
        }
    }
    out.sort();
    if out.is_empty() {
        bail!("no human.obj under {}", root.display());
    }
    Ok(out)
}

pub fn evaluate(pred: &Path, gt: &Path, samples: usize, threshold: f64) -> Result<EvalReport> {
    let mut items = Vec::new();
    for (name, dir) in scene_dirs(pred)? {
        let gt_dir = if name.is_empty() {
            gt.to_path_buf()
        } else {
            gt.join(&name)
        };
        let ph = load_mesh(&dir.join("human.obj"))?;
        let po = load_mesh(&dir.join("object.obj"))?;
        let gh = load_mesh(&gt_dir.join("human.obj"))?;
        let go = load_mesh(&gt_dir.join("object.obj"))?;
        let cd = pa_cd(&ph, &po, &gh, &go, samples)?;
        let contact_f1 = ph.shares_topology(&gh).then(|| {
            let (pc, _) = gt_contact_extract(&ph, &po, threshold);
            let (gc, _) = gt_contact_extract(&gh, &go, threshold);
            contact_f1(&pc, &gc).2
        });
        items.push(EvalItem {
            name,
            pa_cd_human: cd.human,
            pa_cd_object: cd.object,
            pa_cd_combined: cd.combined,
            contact_f1,
        });
    }
    let n = items.len() as f64;
    let mean = |f: fn(&EvalItem) -> f64| items.iter().map(f).sum::<f64>() / n;
    let f1s: Vec<f64> = items.iter().filter_map(|i| i.contact_f1).collect();
    Ok(EvalReport {
        mean_pa_cd_human: mean(|i| i.pa_cd_human),
        mean_pa_cd_object: mean(|i| i.pa_cd_object),
        mean_pa_cd_combined: mean(|i| i.pa_cd_combined),
        mean_contact_f1: (!f1s.is_empty()).then(|| f1s.iter().sum::<f64>() / f1s.len() as f64),
        items,
    })
}

fn eval(a: EvalArgs) -> Result<()> {
    let report = evaluate(&a.pred, &a.gt, a.samples, a.contact_threshold)?;
    eprintln!(
        "{} item(s): PA-CD human {:.3} cm, object {:.3} cm, combined {:.3} cm",
        report.items.len(),
        report.mean_pa_cd_human,
        report.mean_pa_cd_object,
        report.mean_pa_cd_combined
    );
    write_output(&report, Some(&a.out))
}

pub const SCENARIOS: [&str; 1] = ["grasp"];

/// Writes the grasp scene for one seeded trial: body model and posed body,
/// palm contacts, the displaced object, clicks, the transferred annotation,
/// initialization, camera, masks, fit config, ground-truth meshes, and a
/// session description for the annotation service.
pub fn write_grasp(out: &Path, seed: u64) -> Result<()> {
    let scene = synth::grasp_scene();
    let trial = scene.trial(seed);
    fs::create_dir_all(out.join("masks"))?;
    fs::create_dir_all(out.join("gt"))?;

    let contacts: BTreeSet<usize> = scene.contacts.pairs.iter().map(|p| p.body_vertex).collect();
    let (patches, _) = prepare_patches(&scene.gt_body, &contacts)?;
    let clicks: Vec<PatchClicks> = patches
        .iter()
        .map(|p| {
            let a = p.axis.path.positions()[0];
            let b = p.axis.path.end_position();
            let start = scene.gt_object.closest_point(&a).0;
            let end = scene.gt_object.closest_point(&b).0;
            PatchClicks {
                patch_id: p.patch.id,
                clicks: io::Clicks {
                    start,
                    direction: trial.object.position(&end),
                },
            }
        })
        .collect();
    let image_id = format!("grasp-{seed}");
    let outcome = transfer_all(
        &scene.gt_body,
        &contacts,
        &trial.object,
        "box",
        trial.init_scale,
        &clicks,
        &image_id,
    )?;

    io::save_body_model(&scene.body_model, out.join("body_model.json"))?;
    io::save_mesh_file(&scene.gt_body, out.join("body.obj"))?;
    io::save_json(&contacts, out.join("contacts.json"))?;
    io::save_mesh_file(&trial.object, out.join("object.obj"))?;
    io::save_json(&clicks, out.join("clicks.json"))?;
    io::save_annotation(&outcome.document, out.join("annotation.json"))?;
    io::save_json(
        &InitState {
            pose: trial.init_pose.clone(),
            scale: trial.init_scale,
        },
        out.join("init.json"),
    )?;
    io::save_json(&scene.camera, out.join("camera.json"))?;
    io::save_mask_file(&scene.object_mask, out.join("masks/object.pgm"))?;
    io::save_mask_file(&scene.human_mask, out.join("masks/human.pgm"))?;
    io::save_json(&FitConfig::default(), out.join("config.json"))?;
    io::save_mesh_file(&scene.gt_body, out.join("gt/human.obj"))?;
    io::save_mesh_file(&scene.gt_object, out.join("gt/object.obj"))?;
    io::save_json(
        &SessionAssets {
            image_id,
            image_path: String::new(),
            object_id: "box".into(),
            object_scale: trial.init_scale,
            body: "body.obj".into(),
            contacts: "contacts.json".into(),
            object: "object.obj".into(),
        },
        out.join("session.json"),
    )?;
    Ok(())
}

fn synth_command(a: SynthArgs) -> Result<()> {
    match a.scenario.as_str() {
        "grasp" => write_grasp(&a.out, a.seed),
        other => bail!("unknown scenario {other:?}; available: {}", SCENARIOS.join(", ")),
    }
}

fn serve(a: ServeArgs) -> Result<()> {
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port)).await?;
        eprintln!("listening on {}", listener.local_addr()?);
        axum::serve(listener, service::router(a.assets)).await?;
        Ok(())
    })
}
