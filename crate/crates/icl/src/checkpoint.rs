use std::path::{Path, PathBuf};

use numcore::{read_container, write_container, ParamStore, Scalar};
use serde::{Deserialize, Serialize};

use crate::{IclConfig, IclError, IclParams, Standardizer};

#[derive(Serialize, Deserialize)]
struct Sidecar {
    config: IclConfig,
    standardizer: Standardizer,
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

/// Tensors go to `path`, config and standardizer to `path.json`.
pub fn save_model<T: Scalar>(path: &Path, p: &IclParams<T>, std: &Standardizer) -> Result<(), IclError> {
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |source| IclError::Io { path: p, source }
    };
    let f = std::fs::File::create(path).map_err(io(path))?;
    write_container(std::io::BufWriter::new(f), &p.store.to_named())?;
    let side = sidecar(path);
    let json = serde_json::to_string_pretty(&Sidecar { config: p.config.clone(), standardizer: std.clone() })
        .expect("sidecar serializes");
    std::fs::write(&side, json).map_err(io(&side))
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<(IclParams<T>, Standardizer), IclError> {
    let side = sidecar(path);
    let text = std::fs::read_to_string(&side).map_err(|source| IclError::Io { path: side.clone(), source })?;
    let sc: Sidecar = serde_json::from_str(&text).map_err(|e| IclError::Format { path: side, msg: e.to_string() })?;
    sc.config.validate()?;
    let f = std::fs::File::open(path).map_err(|source| IclError::Io { path: path.to_path_buf(), source })?;
    let named = read_container(std::io::BufReader::new(f))?;
    let layout = IclParams::<T>::layout(&sc.config)?;
    let store = ParamStore::from_named(&named, &layout.store)?;
    Ok((IclParams { config: sc.config, store }, sc.standardizer))
}
