use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use dcme::degrade::{degrade, NoiseSpec};
use dcme::encode::encode_with;
use dcme::eval::{
    average_precision, classes_from_ground_truth, default_thresholds, instances_from_labels,
    pixel_accuracy, EvalInstance,
};
use dcme::grid::{
    magnitude_map, subsample_nearest, subsample_nearest_to, upsample_nearest_to, ClassMap,
    GridDims, InstanceLabelMap,
};
use dcme::io::{
    export_magnitude_image, import_cityscapes_ids, load_raster16, load_vecmap, save_image8,
    save_raster16, save_vecmap,
};
use dcme::synth::{generate_scene, random_scene, well_posed_scene, SceneConstraints, SceneSpec};
use dcme::{decode, decode_watershed, Anchor, DecodeOutput, DecodeParams};

use crate::UsageError;

#[derive(Debug, Parser)]
#[command(
    name = "dcme",
    version,
    about = "Center-of-mass displacement encoding for instance label maps"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rasterize a synthetic scene into a label map.
    Synth(SynthArgs),
    /// Label map to vector map.
    Encode(EncodeArgs),
    /// Add seeded noise and blur to a vector map.
    Degrade(DegradeArgs),
    /// Vector map to label map plus an instance report.
    Decode(DecodeArgs),
    /// Render the magnitude of a vector map as an 8-bit image.
    Magview(MagviewArgs),
    /// Nearest-neighbor subsampling of a label map.
    Resample(ResampleArgs),
    /// Average Precision of a predicted label map against ground truth.
    Eval(EvalArgs),
    /// synth, encode, degrade, decode and eval in one run.
    Roundtrip(RoundtripArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AnchorArg {
    Cm,
    Bbox,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Assign,
    Watershed,
}

#[derive(Debug, Args)]
struct SceneArgs {
    /// Scene description (TOML); overrides the random-scene flags.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    shapes: usize,
    #[arg(long, default_value_t = 256)]
    height: usize,
    #[arg(long, default_value_t = 256)]
    width: usize,
    /// Shape area range in pixels, MIN:MAX.
    #[arg(long, default_value = "200:2000", value_parser = parse_range)]
    sizes: (f64, f64),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Output label map (.pgm or .png).
    #[arg(short, long)]
    output: PathBuf,
    /// Output class map.
    #[arg(long)]
    classes: Option<PathBuf>,
    /// Also write the scene description as TOML.
    #[arg(long)]
    save_spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = AnchorArg::Cm)]
    anchor: AnchorArg,
}

#[derive(Debug, Args)]
struct NoiseArgs {
    #[arg(long, default_value_t = 0.0)]
    sigma_fg: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma_bg: f64,
    /// Box blur radius, applied before noise.
    #[arg(long, default_value_t = 0)]
    blur: usize,
}

impl NoiseArgs {
    fn spec(&self, seed: u64) -> NoiseSpec {
        NoiseSpec {
            sigma_fg: self.sigma_fg,
            sigma_bg: self.sigma_bg,
            blur_radius: self.blur,
            seed,
        }
    }
}

#[derive(Debug, Args)]
struct DegradeArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Label map defining the foreground; otherwise pixels with |D| >= 0.5.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ParamArgs {
    #[arg(long, default_value_t = 10.0)]
    dt: f64,
    #[arg(long, default_value_t = 50)]
    vt: u32,
    #[arg(long, default_value_t = 15.0)]
    et: f64,
    #[arg(long, default_value_t = dcme::decode::DEFAULT_EPS_BG)]
    eps_bg: f64,
    #[arg(long, default_value_t = dcme::decode::DEFAULT_R_CM)]
    r_cm: f64,
    #[arg(long, value_enum, default_value_t = Method::Assign)]
    method: Method,
}

impl ParamArgs {
    fn params(&self) -> DecodeParams {
        DecodeParams {
            eps_bg: self.eps_bg,
            r_cm: self.r_cm,
            ..DecodeParams::new(self.dt, self.vt, self.et)
        }
    }

    fn run(&self, vm: &dcme::grid::VectorMap) -> Result<DecodeOutput> {
        let params = self.params();
        Ok(match self.method {
            Method::Assign => decode(vm, &params)?,
            Method::Watershed => decode_watershed(vm, &params)?,
        })
    }
}

#[derive(Debug, Args)]
struct DecodeArgs {
    input: PathBuf,
    /// Output label map.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Instance report (JSON); printed to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Debug, Args)]
struct MagviewArgs {
    input: PathBuf,
    /// Output image (.pgm or .png).
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct ResampleArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 3)]
    factor: usize,
    /// Crop the subsampled map to HxW.
    #[arg(long, value_parser = parse_dims)]
    target_dims: Option<GridDims>,
    /// Upsample back to the input dimensions.
    #[arg(long)]
    restore: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Predicted label map.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth label map, or a Cityscapes instanceIds raster with --cityscapes.
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    pred_classes: Option<PathBuf>,
    #[arg(long)]
    gt_classes: Option<PathBuf>,
    /// Decode report whose per-instance confidences rank the predictions.
    #[arg(long)]
    confidences: Option<PathBuf>,
    #[arg(long)]
    cityscapes: bool,
    /// Output report (JSON); printed to stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RoundtripArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    shapes: usize,
    /// Occluder bars splitting earlier shapes.
    #[arg(long, default_value_t = 0)]
    splits: usize,
    #[arg(long, default_value_t = 256)]
    height: usize,
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value = "200:2000", value_parser = parse_range)]
    sizes: (f64, f64),
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected MIN:MAX")?;
    let a: f64 = a.parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.parse().map_err(|e| format!("{e}"))?;
    if !(a > 0.0 && a <= b) {
        return Err("need 0 < MIN <= MAX".into());
    }
    Ok((a, b))
}

fn parse_dims(s: &str) -> std::result::Result<GridDims, String> {
    let (h, w) = s.split_once('x').ok_or("expected HxW")?;
    let h = h.parse().map_err(|e| format!("{e}"))?;
    let w = w.parse().map_err(|e| format!("{e}"))?;
    GridDims::new(h, w).map_err(|e| e.to_string())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Encode(a) => encode_cmd(a),
        Command::Degrade(a) => degrade_cmd(a),
        Command::Decode(a) => decode_cmd(a),
        Command::Magview(a) => magview(a),
        Command::Resample(a) => resample(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Roundtrip(a) => roundtrip(a),
    }
}

fn read_labels(path: &Path) -> Result<InstanceLabelMap> {
    load_raster16(path).with_context(|| format!("reading {}", path.display()))
}

fn write_labels(grid: &InstanceLabelMap, path: &Path) -> Result<()> {
    save_raster16(grid, path).with_context(|| format!("writing {}", path.display()))
}

fn read_vm(path: &Path) -> Result<dcme::grid::VectorMap> {
    load_vecmap(path).with_context(|| format!("reading {}", path.display()))
}

fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => {
            std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?
        }
        None => {
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{text}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                r => r?,
            }
        }
    }
    Ok(())
}

fn scene_spec(a: &SceneArgs) -> Result<SceneSpec> {
    match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            Ok(SceneSpec::from_toml(&text)?)
        }
        None => Ok(random_scene(
            GridDims::new(a.height, a.width)?,
            a.shapes,
            a.sizes,
            a.seed,
        )),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = scene_spec(&a.scene)?;
    let (ids, classes) = generate_scene(&spec)?;
    write_labels(&ids, &a.output)?;
    if let Some(p) = &a.classes {
        write_labels(&classes, p)?;
    }
    if let Some(p) = &a.save_spec {
        std::fs::write(p, spec.to_toml()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn encode_cmd(a: EncodeArgs) -> Result<()> {
    let lm = read_labels(&a.input)?;
    let anchor = match a.anchor {
        AnchorArg::Cm => Anchor::CenterOfMass,
        AnchorArg::Bbox => Anchor::BoundingBoxCentroid,
    };
    save_vecmap(&encode_with(&lm, anchor), &a.output)?;
    Ok(())
}

fn degrade_cmd(a: DegradeArgs) -> Result<()> {
    let vm = read_vm(&a.input)?;
    let mask = match &a.labels {
        Some(p) => read_labels(p)?.map(|&id| id != 0),
        None => vm.foreground_mask(dcme::decode::DEFAULT_EPS_BG),
    };
    save_vecmap(&degrade(&vm, &mask, &a.noise.spec(a.seed))?, &a.output)?;
    Ok(())
}

fn decode_cmd(a: DecodeArgs) -> Result<()> {
    let vm = read_vm(&a.input)?;
    let out = a.params.run(&vm)?;
    if let Some(p) = &a.output {
        write_labels(&out.labels, p)?;
    }
    let report = json!({
        "params": a.params.params(),
        "height": vm.dims().height,
        "width": vm.dims().width,
        "instances": out.instances,
    });
    emit(&report, a.report.as_deref())
}

fn magview(a: MagviewArgs) -> Result<()> {
    let vm = read_vm(&a.input)?;
    save_image8(&export_magnitude_image(&magnitude_map(&vm)), &a.output)
        .with_context(|| format!("writing {}", a.output.display()))
}

fn resample(a: ResampleArgs) -> Result<()> {
    let lm = read_labels(&a.input)?;
    let small = match a.target_dims {
        Some(t) => subsample_nearest_to(&lm, a.factor, t)?,
        None => subsample_nearest(&lm, a.factor)?,
    };
    let out = if a.restore {
        upsample_nearest_to(&small, a.factor, lm.dims())?
    } else {
        small
    };
    write_labels(&out, &a.output)
}

fn confidences(path: &Path) -> Result<BTreeMap<u16, f64>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let report: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let instances = report["instances"]
        .as_array()
        .ok_or_else(|| UsageError(format!("{}: no instances array", path.display())))?;
    instances
        .iter()
        .map(|i| {
            let label = i["label"].as_u64().and_then(|l| u16::try_from(l).ok());
            let conf = i["confidence"].as_f64();
            label.zip(conf).ok_or_else(|| {
                UsageError(format!("{}: malformed instance entry", path.display())).into()
            })
        })
        .collect()
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let pred = read_labels(&a.pred)?;
    let (gt, gt_classes): (InstanceLabelMap, Option<ClassMap>) = if a.cityscapes {
        if a.gt_classes.is_some() {
            return Err(UsageError("--gt-classes conflicts with --cityscapes".into()).into());
        }
        let (ids, classes) = import_cityscapes_ids(&read_labels(&a.gt)?);
        (ids, Some(classes))
    } else {
        let classes = a.gt_classes.as_deref().map(read_labels).transpose()?;
        (read_labels(&a.gt)?, classes)
    };
    let pred_classes = a.pred_classes.as_deref().map(read_labels).transpose()?;
    let conf = a.confidences.as_deref().map(confidences).transpose()?;
    let mut preds = instances_from_labels(&pred, pred_classes.as_ref(), conf.as_ref())?;
    if pred_classes.is_none() {
        if let Some(c) = &gt_classes {
            classes_from_ground_truth(&mut preds, c);
        }
    }
    let gts = instances_from_labels(&gt, gt_classes.as_ref(), None)?;
    let report = average_precision(&preds, &gts, &default_thresholds())?;
    emit(&report, a.output.as_deref())
}

fn roundtrip(a: RoundtripArgs) -> Result<()> {
    let params = a.params.params();
    params.validate()?;
    let dims = GridDims::new(a.height, a.width)?;
    let constraints = SceneConstraints {
        min_pixels: (params.vt as usize).max(2),
        max_pixels: dims.len(),
        min_center_distance: 2.0 * params.dt,
    };
    let spec = well_posed_scene(dims, a.shapes, a.splits, a.sizes, &constraints, a.seed);
    let (ids, classes) = generate_scene(&spec)?;
    let gt_mask = ids.map(|&id| id != 0);
    let vm = degrade(
        &encode_with(&ids, Anchor::CenterOfMass),
        &gt_mask,
        &a.noise.spec(a.noise_seed),
    )?;
    let out = a.params.run(&vm)?;

    let conf: BTreeMap<u16, f64> = out
        .instances
        .iter()
        .map(|i| (i.label, i.confidence))
        .collect();
    let preds: Vec<EvalInstance> = instances_from_labels(&out.labels, Some(&classes), Some(&conf))?;
    let gts = instances_from_labels(&ids, Some(&classes), None)?;
    let (ap, ap50) = if gts.is_empty() {
        (None, None)
    } else {
        let r = average_precision(&preds, &gts, &default_thresholds())?;
        (Some(r.ap), Some(r.ap50))
    };
    let report = json!({
        "scene_seed": a.seed,
        "params": params,
        "noise": a.noise.spec(a.noise_seed),
        "n_gt": gts.len(),
        "n_pred": preds.len(),
        "ap": ap,
        "ap50": ap50,
        "pixel_accuracy": pixel_accuracy(&out.labels, &ids)?,
    });
    emit(&report, a.output.as_deref())
}
