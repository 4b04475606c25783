from app.bench.cli import main

raise SystemExit(main())
