use std::path::{Path, PathBuf};

use layoutforge::gateway::{Cassette, Gateway, GatewayConfig, ModelRole, UreqTransport};
use layoutforge::pipeline::PipelineConfig;

use crate::commands::Abort;
use crate::report::RunReport;
use crate::{Global, ModeArg};

const DEFAULT_CONFIG: &str = "layoutforge.config";

/// `--config`, then `./layoutforge.config`, then built-in defaults.
pub fn load_config(global: &Global, report: &mut RunReport) -> Result<GatewayConfig, Abort> {
    let path = match &global.config {
        Some(p) => Some(p.clone()),
        None => Some(PathBuf::from(DEFAULT_CONFIG)).filter(|p| p.is_file()),
    };
    let mut config = match path {
        Some(p) => report.stage("config", |_| GatewayConfig::load(&p))?,
        None => GatewayConfig::default(),
    };
    if let Some(seed) = global.seed {
        for role in ModelRole::ALL {
            let mut rc = config.role(role);
            rc.seed = seed;
            config.roles.insert(role, rc);
        }
    }
    Ok(config)
}

pub fn pipeline_config(config: &GatewayConfig) -> PipelineConfig {
    let mut pc = PipelineConfig::from_gateway(config);
    for role in ModelRole::ALL {
        pc.decode.insert(role, config.decode(role));
    }
    pc
}

fn cassette_path(global: &Global) -> Result<&Path, Abort> {
    global.cassette.as_deref().ok_or_else(|| {
        Abort::Usage(format!(
            "--cassette is required in {} mode",
            if global.mode == ModeArg::Replay { "replay" } else { "record" }
        ))
    })
}

/// Gateway for the selected mode. Replay is the default; live calls must be
/// asked for explicitly.
pub fn open_gateway(global: &Global, config: &GatewayConfig, report: &mut RunReport) -> Result<Gateway, Abort> {
    match global.mode {
        ModeArg::Replay => {
            let path = cassette_path(global)?;
            let cassette = report.stage("cassette", |_| Cassette::load(path))?;
            Ok(Gateway::replay(cassette))
        }
        ModeArg::Record => {
            let path = cassette_path(global)?.to_path_buf();
            let cassette = if path.is_file() {
                report.stage("cassette", |_| Cassette::load(&path))?
            } else {
                Cassette::new()
            };
            let transport = UreqTransport::new(config.retry.timeout());
            Ok(Gateway::record(config.clone(), Box::new(transport), cassette, Some(path)))
        }
        ModeArg::Live => {
            let transport = UreqTransport::new(config.retry.timeout());
            Ok(Gateway::live(config.clone(), Box::new(transport)))
        }
    }
}
