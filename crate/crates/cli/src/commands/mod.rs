//! One module per subcommand. Each exposes `run` for the binary and a typed
//! entry point for in-process callers.

use std::path::Path;

use anyhow::Context;

pub mod eval;
pub mod fixtures;
pub mod inspect;
pub mod train;

pub(crate) fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}
