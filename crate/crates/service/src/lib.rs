//! Job service and HTTP API around [`mixel_core`].
//!
//! ```no_run
//! use mixel_service::{router, DeviceConfig, JobService, ServiceConfig};
//!
//! # async fn serve() -> std::io::Result<()> {
//! let service = JobService::new(ServiceConfig::default());
//! service.add_device("sim", DeviceConfig::default()).unwrap();
//! let listener = tokio::net::TcpListener::bind("127.0.0.1:8080").await?;
//! axum::serve(listener, router(service)).await
//! # }
//! ```

pub mod api;
pub mod error;
pub mod jobs;

pub use api::router;
pub use error::{ServiceError, ServiceResult};
pub use jobs::{classify_reading, DeviceConfig, Job, JobKind, JobService, JobState, ServiceConfig};
