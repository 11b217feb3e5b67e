"""Phase-field oracle package"""

# Version of the application
__version__ = "0.1.0"  # x-release-please-version
