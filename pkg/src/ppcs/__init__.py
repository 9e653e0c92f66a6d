"""Privacy-preserving outsourced compressive-sensing recovery for ECG."""
