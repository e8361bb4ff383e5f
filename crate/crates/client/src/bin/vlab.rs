use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use vlab_client::{ClientError, EmbeddedServer, LabClient};
use vlab_core::signal::iqfile::read_iq;
use vlab_core::trainer::{write_artifacts, AnalyzeOptions, Artifact, ChallengeKind, Difficulty};
use vlab_core::VlabError;
use vlab_service::{ChallengeRequest, WireArtifact};

/// Virtual communications lab. Talks to the server named by `VLAB_SERVER`
/// (e.g. `http://127.0.0.1:8080`) or starts one in-process.
#[derive(Parser)]
#[command(name = "vlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reproduce one training module's headline observation as data files.
    Demo {
        /// Module number, 1 to 9.
        module: u8,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    #[command(subcommand)]
    Challenge(ChallengeCommand),
    /// Write PSD, CCDF, eye and spectrogram data for an IQ file.
    Analyze {
        iq_file: PathBuf,
        #[arg(long)]
        psd: bool,
        #[arg(long)]
        ccdf: bool,
        /// Eye diagram at this many samples per symbol.
        #[arg(long, value_name = "SPS")]
        eye: Option<usize>,
        #[arg(long)]
        spectrogram: bool,
        /// Output directory; defaults to `<iq-file stem>.analysis` beside the input.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ChallengeCommand {
    /// Generate a challenge: trainee files under `OUT/trainee`, the truth under `OUT/instructor`.
    Gen {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        difficulty: String,
        #[arg(long)]
        trainee: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grade an answer against the sealed truth and print the report.
    Grade {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        answer: PathBuf,
    },
}

enum Failure {
    Validation(String),
    Other(String),
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        if e.is_validation() {
            let msg = match &e {
                ClientError::Api { body, .. } => match &body.field {
                    Some(f) => format!("{f}: {}", body.message),
                    None => body.message.clone(),
                },
                _ => e.to_string(),
            };
            Failure::Validation(msg)
        } else {
            Failure::Other(e.to_string())
        }
    }
}

impl From<VlabError> for Failure {
    fn from(e: VlabError) -> Self {
        match e {
            VlabError::Io(e) => Failure::Other(e.to_string()),
            e => Failure::Validation(e.to_string()),
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn save(dir: &Path, wire: &[WireArtifact]) -> Result<(), Failure> {
    let artifacts = wire
        .iter()
        .map(|w| w.decode().map_err(|e| Failure::Other(e.message)))
        .collect::<Result<Vec<Artifact>, _>>()?;
    write_artifacts(dir, &artifacts)?;
    for a in &artifacts {
        println!("{}", dir.join(&a.name).display());
    }
    Ok(())
}

async fn run(client: &LabClient, command: Command) -> Result<(), Failure> {
    match command {
        Command::Demo { module, out, seed } => {
            let demo = client.demo(module, seed).await?;
            println!("module {}: {}", demo.module, demo.title);
            println!("{}", demo.headline);
            save(&out, &demo.artifacts)
        }
        Command::Challenge(ChallengeCommand::Gen {
            kind,
            difficulty,
            trainee,
            seed,
            out,
        }) => {
            let req = ChallengeRequest {
                kind: kind.parse::<ChallengeKind>()?,
                difficulty: difficulty.parse::<Difficulty>()?,
                trainee_id: trainee,
                seed,
            };
            let ch = client.generate_challenge(&req).await?;
            save(&out.join("trainee"), &ch.artifacts)?;
            save(&out.join("instructor"), std::slice::from_ref(&ch.truth))
        }
        Command::Challenge(ChallengeCommand::Grade {
            scenario,
            truth,
            answer,
        }) => {
            let report = client
                .grade(read_json(&scenario)?, read_json(&truth)?, read_json(&answer)?)
                .await?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(())
        }
        Command::Analyze {
            iq_file,
            psd,
            ccdf,
            eye,
            spectrogram,
            out,
        } => {
            let (signal, _) = read_iq(&iq_file)?;
            let mut opts = AnalyzeOptions {
                psd,
                ccdf,
                eye_sps: eye,
                spectrogram,
            };
            if !(psd || ccdf || spectrogram || eye.is_some()) {
                opts.psd = true;
                opts.ccdf = true;
            }
            let out = out.unwrap_or_else(|| iq_file.with_extension("analysis"));
            let set = client.analyze(&signal, opts).await?;
            save(&out, &set.artifacts)
        }
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    let embedded;
    let client = match std::env::var("VLAB_SERVER") {
        Ok(url) if !url.is_empty() => LabClient::new(url),
        _ => match EmbeddedServer::start().await {
            Ok(s) => {
                embedded = s;
                embedded.client().clone()
            }
            Err(e) => {
                eprintln!("error: cannot start embedded server: {e}");
                return ExitCode::FAILURE;
            }
        },
    };
    match run(&client, cli.command).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
