use std::process::ExitCode;

use nishpaksh_server::{serve, ServerConfig};

#[tokio::main]
async fn main() -> ExitCode {
    let result = match ServerConfig::from_env() {
        Ok(config) => serve(config).await,
        Err(e) => Err(e),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::to_string(&e.to_api_error()).unwrap_or_default()
            );
            ExitCode::from(3)
        }
    }
}
