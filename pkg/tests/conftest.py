from hypothesis import HealthCheck, settings

# keep the suite deterministic run to run
settings.register_profile(
    "ci",
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")
