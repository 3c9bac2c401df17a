from haar_fluctuations.cli import main

raise SystemExit(main())
