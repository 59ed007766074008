# Single source of truth for information needed at runtime and build-time (i.e. version)
version = "0.1.0"

# Version of the JSON layout written by the reports; bump on incompatible changes
report_schema_version = 1
