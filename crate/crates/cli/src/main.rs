use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use agasdf::despawn::{decode, encode_valid, DespawnModel};
use agasdf::experiments::{
    depth_for_length, prepare, run_task, run_weight_sweep, split_rides, ExperimentPlan, Task, TrainSettings,
};
use agasdf::features::{features_csv, parse_features_csv, MethodTag};
use agasdf::signal::{load_dataset, read_f32_signal, write_f32_file, ClassLabel, SourceKind};
use agasdf::svm::{evaluate, Classifier};
use agasdf::synthgen::{generate_dataset, generate_records, DurationProfile, SynthConfig, SAMPLE_RATE_HZ};
use agasdf::training::{run_gradcheck, LossKind, LossWeights};

#[derive(Parser, Debug)]
#[command(name = "agasdf", version, about = "Acceleration-guided acoustic denoising and track-condition classification")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Cap on worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Output directory or file, depending on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the synthetic paired dataset.
    Synth {
        #[arg(long, default_value_t = 0.0)]
        snr_db: f64,
        #[arg(long, value_enum, default_value_t = Profile::Desk)]
        profile: Profile,
    },
    /// Train a learnable transform on a dataset; writes model.json and loss.csv.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "agasdf")]
        loss: LossKind,
        #[arg(long, default_value = "1:1")]
        weights: LossWeights,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Train only on the training rides of this plan's split.
        #[arg(long)]
        split: Option<Task>,
    },
    /// Encode one signal and write each layer as CSV.
    Transform {
        #[arg(long)]
        input: PathBuf,
        /// Trained model; without one the fixed db4 transform is used.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, default_value_t = SAMPLE_RATE_HZ)]
        sample_rate: f64,
    },
    /// Encode and decode one signal through a trained model.
    Denoise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = SAMPLE_RATE_HZ)]
        sample_rate: f64,
    },
    /// Feature CSV of one method over a dataset.
    Features {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        method: MethodTag,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Restrict to one side of this plan's split.
        #[arg(long)]
        split: Option<Task>,
        #[arg(long, value_enum, default_value_t = Side::All)]
        side: Side,
    },
    /// Fit the SVM on one feature CSV and evaluate on another.
    Classify {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Compare analytic and numeric gradients on a random instance.
    Gradcheck {
        #[arg(long, default_value_t = 64)]
        length: usize,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Run an evaluation protocol and write its report.
    Experiment {
        #[arg(long)]
        plan: Task,
        /// Dataset manifest; without one the synthetic dataset is generated in memory.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        snr_db: f64,
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Comma-separated methods; defaults to all of them.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<MethodTag>>,
        #[arg(long, default_value = "1:1")]
        weights: LossWeights,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Profile {
    Desk,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum Side {
    All,
    Train,
    Test,
}

/// Failure with its exit status.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let numerical = error
            .chain()
            .any(|e| e.downcast_ref::<agasdf::Error>().is_some_and(agasdf::Error::is_numerical));
        Failure {
            code: if numerical { 2 } else { 1 },
            error,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn out_dir(out: &Option<PathBuf>) -> anyhow::Result<&Path> {
    let dir = out.as_deref().ok_or_else(|| anyhow!("--out is required"))?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn require_file(p: &Path) -> anyhow::Result<()> {
    if !p.is_file() {
        bail!("{}: no such file", p.display());
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    if cli.threads == 0 {
        return Err(anyhow!("--threads must be at least 1").into());
    }
    match cli.command {
        Command::Synth { snr_db, profile } => {
            let dir = out_dir(&cli.out)?;
            let mut cfg = SynthConfig::new(cli.seed);
            cfg.acoustic_snr_db = snr_db;
            cfg.profile = match profile {
                Profile::Desk => DurationProfile::Desk,
                Profile::Full => DurationProfile::Full,
            };
            let m = generate_dataset(dir, &cfg).map_err(anyhow::Error::from)?;
            println!("wrote {} records to {}", m.records.len(), dir.display());
        }
        Command::Train { dataset, loss, weights, epochs, lr, split } => {
            require_file(&dataset)?;
            let dir = out_dir(&cli.out)?;
            let (_, records) = load_dataset(&dataset).map_err(anyhow::Error::from)?;
            let data = prepare(&records).map_err(anyhow::Error::from)?;
            let rides = match split {
                Some(t) => split_rides(&data, t, cli.seed).map_err(anyhow::Error::from)?.train,
                None => (0..data.rides.len()).collect(),
            };
            let mut settings = TrainSettings::desk();
            if let Some(e) = epochs {
                settings.epochs = e;
            }
            if let Some(r) = lr {
                settings.learning_rate = r;
            }
            let out = data
                .train_model(&rides, loss, weights, &settings, cli.seed)
                .map_err(anyhow::Error::from)?;
            out.model.save(&dir.join("model.json")).map_err(anyhow::Error::from)?;
            write(&dir.join("loss.csv"), &out.trace_csv())?;
            if let (Some(first), Some(last)) = (out.trace.first(), out.trace.last()) {
                println!(
                    "{} epochs, loss {:.6} -> {:.6}",
                    out.trace.len(),
                    first.mean_loss,
                    last.mean_loss
                );
            }
        }
        Command::Transform { input, model, depth, sample_rate } => {
            require_file(&input)?;
            if let Some(m) = &model {
                require_file(m)?;
            }
            let dir = out_dir(&cli.out)?;
            let s = read_f32_signal(&input, sample_rate, SourceKind::Acoustic).map_err(anyhow::Error::from)?;
            let model = match model {
                Some(p) => DespawnModel::load(&p).map_err(anyhow::Error::from)?,
                None => {
                    let d = depth.unwrap_or_else(|| depth_for_length(s.len().max(2)));
                    DespawnModel::db4(d, 0.0).map_err(anyhow::Error::from)?
                }
            };
            let p = encode_valid(s.samples(), s.len(), &model).map_err(anyhow::Error::from)?;
            for (i, d) in p.details.iter().enumerate() {
                write(&dir.join(format!("detail_{}.csv", i + 1)), &column_csv(d))?;
            }
            write(&dir.join("approximation.csv"), &column_csv(&p.approximation))?;
            println!("wrote {} layers to {}", p.depth() + 1, dir.display());
        }
        Command::Denoise { input, model, sample_rate } => {
            require_file(&input)?;
            require_file(&model)?;
            let out = cli.out.ok_or_else(|| anyhow!("--out is required"))?;
            let s = read_f32_signal(&input, sample_rate, SourceKind::Acoustic).map_err(anyhow::Error::from)?;
            let m = DespawnModel::load(&model).map_err(anyhow::Error::from)?;
            let p = encode_valid(s.samples(), s.len(), &m).map_err(anyhow::Error::from)?;
            let r = decode(&p, &m).map_err(anyhow::Error::from)?;
            write_f32_file(&out, &r[..s.len()]).map_err(anyhow::Error::from)?;
            println!("wrote {} samples to {}", s.len(), out.display());
        }
        Command::Features { dataset, method, model, split, side } => {
            require_file(&dataset)?;
            if let Some(m) = &model {
                require_file(m)?;
            }
            let out = cli.out.ok_or_else(|| anyhow!("--out is required"))?;
            let (_, records) = load_dataset(&dataset).map_err(anyhow::Error::from)?;
            let data = prepare(&records).map_err(anyhow::Error::from)?;
            let rides = match (split, side) {
                (_, Side::All) => (0..data.rides.len()).collect(),
                (None, _) => return Err(anyhow!("--side needs --split").into()),
                (Some(t), s) => {
                    let sp = split_rides(&data, t, cli.seed).map_err(anyhow::Error::from)?;
                    if s == Side::Train {
                        sp.train
                    } else {
                        sp.test
                    }
                }
            };
            let model = model
                .map(|p| DespawnModel::load(&p))
                .transpose()
                .map_err(anyhow::Error::from)?;
            let rows = data
                .feature_vectors(method, &rides, model.as_ref())
                .map_err(anyhow::Error::from)?;
            write(&out, &features_csv(&rows))?;
            println!("wrote {} feature rows to {}", rows.len(), out.display());
        }
        Command::Classify { train, test } => {
            require_file(&train)?;
            require_file(&test)?;
            let read = |p: &Path| -> anyhow::Result<_> {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Ok(parse_features_csv(&text)?)
            };
            let tr = read(&train)?;
            let te = read(&test)?;
            let x: Vec<Vec<f64>> = tr.iter().map(|r| r.values.clone()).collect();
            let y: Vec<usize> = tr.iter().map(|r| r.label.index()).collect();
            let g: Vec<String> = tr.iter().map(|r| r.ride_id.clone()).collect();
            let clf = Classifier::fit(&x, &y, &g, cli.seed).map_err(anyhow::Error::from)?;
            let xt: Vec<Vec<f64>> = te.iter().map(|r| r.values.clone()).collect();
            let yt: Vec<usize> = te.iter().map(|r| r.label.index()).collect();
            let ev = evaluate(&clf.predict_all(&xt), &yt, ClassLabel::ALL.len());
            let mut text = format!(
                "C = {}, gamma = {}, cv accuracy {:.1}\n",
                clf.svm.c, clf.svm.gamma, clf.cv_accuracy
            );
            for (c, acc) in ClassLabel::ALL.iter().zip(&ev.per_class) {
                match acc {
                    Some(a) => text.push_str(&format!("{:<16}{a:6.1}\n", c.as_str())),
                    None => text.push_str(&format!("{:<16}{:>6}\n", c.as_str(), "-")),
                }
            }
            text.push_str(&format!("{:<16}{:6.1}\n", "average", ev.average));
            print!("{text}");
            if let Some(out) = cli.out {
                write(&out, &text)?;
            }
        }
        Command::Gradcheck { length, depth, step, tolerance } => {
            let r = run_gradcheck(cli.seed, length, depth, step, tolerance).map_err(anyhow::Error::from)?;
            println!(
                "worst relative error {:.3e} at {} over {} parameters: {}",
                r.worst_rel_error,
                r.worst_param,
                r.n_params,
                if r.passed { "PASS" } else { "FAIL" }
            );
            if !r.passed {
                return Err(Failure {
                    code: 2,
                    error: anyhow!("gradient check failed at tolerance {:e}", r.tolerance),
                });
            }
        }
        Command::Experiment { plan, dataset, snr_db, repetitions, epochs, lr, methods, weights } => {
            if let Some(d) = &dataset {
                require_file(d)?;
            }
            let dir = out_dir(&cli.out)?;
            let records = match &dataset {
                Some(d) => load_dataset(d).map_err(anyhow::Error::from)?.1,
                None => {
                    let mut cfg = SynthConfig::new(cli.seed);
                    cfg.acoustic_snr_db = snr_db;
                    generate_records(&cfg).map_err(anyhow::Error::from)?
                }
            };
            let data = prepare(&records).map_err(anyhow::Error::from)?;
            let mut p = ExperimentPlan::new(plan, cli.seed);
            p.threads = cli.threads;
            p.weights = weights;
            if let Some(r) = repetitions {
                p.repetitions = r;
            }
            if let Some(e) = epochs {
                p.train.epochs = e;
            }
            if let Some(r) = lr {
                p.train.learning_rate = r;
            }
            if let Some(m) = methods {
                p.methods = m;
            }
            let (csv, text) = if plan == Task::WeightSweep {
                let r = run_weight_sweep(&data, &p, &Task::SPLITS).map_err(anyhow::Error::from)?;
                (r.to_csv(), r.to_text())
            } else {
                let r = run_task(&data, &p).map_err(anyhow::Error::from)?;
                (r.to_csv(), r.to_text())
            };
            write(&dir.join(format!("{plan}.csv")), &csv)?;
            write(&dir.join(format!("{plan}.txt")), &text)?;
            print!("{text}");
        }
    }
    Ok(())
}

fn column_csv(v: &[f64]) -> String {
    let mut s = String::from("index,value\n");
    for (i, x) in v.iter().enumerate() {
        s.push_str(&format!("{i},{x}\n"));
    }
    s
}
