use thiserror::Error;

pub const THREADS_ENV: &str = "LOADCNN_THREADS";

#[derive(Debug, Error)]
pub enum ThreadConfigError {
    #[error("{THREADS_ENV}={0:?} is not a non-negative integer")]
    Invalid(String),
    #[error("failed to build thread pool: {0}")]
    Pool(String),
}

/// Worker cap from `LOADCNN_THREADS`; `None` (unset or 0) means automatic.
pub fn threads_from_env() -> Result<Option<usize>, ThreadConfigError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(n) => Ok(Some(n)),
            Err(_) => Err(ThreadConfigError::Invalid(v)),
        },
    }
}

/// Sizes the global worker pool. Results never depend on the worker count.
pub fn configure_threads() -> Result<(), ThreadConfigError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads_from_env()? {
        builder = builder.num_threads(n);
    }
    builder
        .build_global()
        .map_err(|e| ThreadConfigError::Pool(e.to_string()))
}
