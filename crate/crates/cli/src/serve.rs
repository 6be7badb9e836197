use std::net::SocketAddr;
use std::sync::Arc;

use scenesmith_core::generation::TemplateSet;
use scenesmith_core::review::ProjectStore;
use scenesmith_server::{bind, serve, AppState, Regenerator, ServeError};

use crate::config::CliConfig;
use crate::exit::{fail, CmdResult, Code, Failure, WithCode};

pub fn cmd_serve(cfg: &CliConfig) -> CmdResult {
    let store = ProjectStore::open(&cfg.root).map_err(|e| {
        let code = match e {
            scenesmith_core::review::ReviewError::StoreCorrupt { .. } => Code::Invalid,
            _ => Code::Usage,
        };
        Failure { code, error: e.into() }
    })?;
    if store.ids().is_empty() {
        log::warn!("no projects under {}", cfg.root.display());
    }
    let state = AppState {
        store: Arc::new(store),
        regen: Arc::new(Regenerator {
            backend: Arc::from(cfg.make_backend().code(Code::Usage)?),
            templates: TemplateSet::builtin(),
            config: cfg.generation,
        }),
    };
    let runtime = tokio::runtime::Runtime::new().code(Code::Usage)?;
    runtime.block_on(async {
        let listener = bind(SocketAddr::from(([127, 0, 0, 1], cfg.port))).await.map_err(|e| match e {
            ServeError::PortInUse(p) => fail(Code::Usage, format!("port {p} is already in use")),
            other => fail(Code::Usage, other),
        })?;
        println!("review API on http://{}", listener.local_addr().code(Code::Usage)?);
        serve(listener, state).await.code(Code::Usage)?;
        Ok(Code::Ok)
    })
}
