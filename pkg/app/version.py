#!/usr/bin/env python3
"""
Version information for the phase-field oracle.
"""

__version__ = "0.1.0"  # x-release-please-version
"""
Version string following Semantic Versioning (SemVer) format: MAJOR.MINOR.PATCH
- MAJOR: Incompatible changes to the CLI or the file formats
- MINOR: Backward-compatible new functionality
- PATCH: Backward-compatible bug fixes
"""
